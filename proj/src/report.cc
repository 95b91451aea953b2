#include "mlab/report.h"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace mlab {

namespace {

// Column type codes: S string, I integer, N integer or real, E integer or
// string (episode index or an aggregate label such as "mean").
struct Schema {
  std::vector<std::string> header;
  std::string types;
};

const Schema& SchemaFor(ReportKind kind) {
  static const Schema kAttack{
      {"victim_id", "demo_count", "episode", "regret", "perturbations"}, "SIENN"};
  static const Schema kTransfer{
      {"victim_id", "demo_count", "episode", "crafted", "transferred"}, "SIENN"};
  static const Schema kCrop{
      {"omega", "mean_return", "imitation_agreement", "mean_transfers"}, "NNNN"};
  static const Schema kCurve{{"episode", "steps", "return"}, "IIN"};
  static const Schema kLog{{"step", "loss", "agreement"}, "INN"};
  static const Schema kSummary{
      {"victim_id", "demo_count", "heldout_agreement", "rollout_agreement"}, "SINN"};
  switch (kind) {
    case ReportKind::kAttack: return kAttack;
    case ReportKind::kTransfer: return kTransfer;
    case ReportKind::kCrop: return kCrop;
    case ReportKind::kTrainingCurve: return kCurve;
    case ReportKind::kImitationLog: return kLog;
    case ReportKind::kImitationSummary: return kSummary;
  }
  throw std::logic_error("unknown report kind");
}

bool CellMatches(const ReportCell& cell, char type) {
  switch (type) {
    case 'S': return std::holds_alternative<std::string>(cell);
    case 'I': return std::holds_alternative<std::int64_t>(cell);
    case 'N': return !std::holds_alternative<std::string>(cell);
    case 'E': return !std::holds_alternative<double>(cell);
  }
  return false;
}

std::string RenderCell(const ReportCell& cell) {
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&cell)) return FormatReal(*d);
  return std::get<std::string>(cell);
}

}  // namespace

const std::vector<std::string>& ReportHeader(ReportKind kind) {
  return SchemaFor(kind).header;
}

ReportKind ParseReportKind(std::string_view name) {
  if (name == "attack") return ReportKind::kAttack;
  if (name == "transfer") return ReportKind::kTransfer;
  if (name == "crop") return ReportKind::kCrop;
  if (name == "training-curve") return ReportKind::kTrainingCurve;
  if (name == "imitation-log") return ReportKind::kImitationLog;
  if (name == "imitation-summary") return ReportKind::kImitationSummary;
  throw std::invalid_argument("unknown report kind: " + std::string(name));
}

std::string FormatReal(double value) {
  if (!std::isfinite(value)) {
    throw ReportSchemaError("report: non-finite value");
  }
  if (value == 0.0) value = 0.0;  // drop the sign of -0
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%#.6g", value);
  return buf;
}

std::string RenderReport(ReportKind kind, const std::vector<ReportRow>& rows) {
  const Schema& schema = SchemaFor(kind);
  std::string out;
  for (size_t i = 0; i < schema.header.size(); ++i) {
    if (i) out += ',';
    out += schema.header[i];
  }
  out += '\n';
  for (size_t r = 0; r < rows.size(); ++r) {
    const ReportRow& row = rows[r];
    if (row.size() != schema.header.size()) {
      throw ReportSchemaError("report: row " + std::to_string(r) + " has " +
                              std::to_string(row.size()) + " cells, expected " +
                              std::to_string(schema.header.size()));
    }
    for (size_t c = 0; c < row.size(); ++c) {
      if (!CellMatches(row[c], schema.types[c])) {
        throw ReportSchemaError("report: bad type in row " + std::to_string(r) +
                                ", column " + schema.header[c]);
      }
      if (const auto* s = std::get_if<std::string>(&row[c]);
          s && s->find_first_of(",\"\r\n") != std::string::npos) {
        throw ReportSchemaError("report: string cell needs quoting: " + *s);
      }
      if (c) out += ',';
      out += RenderCell(row[c]);
    }
    out += '\n';
  }
  return out;
}

void WriteReport(const std::filesystem::path& path, ReportKind kind,
                 const std::vector<ReportRow>& rows) {
  const std::string text = RenderReport(kind, rows);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << text;
}

}  // namespace mlab
