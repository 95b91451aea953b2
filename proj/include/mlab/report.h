#pragma once

// CSV report writers with fixed per-kind headers. Output uses LF line
// endings, '.' as decimal separator and 6 significant digits for reals.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mlab {

enum class ReportKind {
  kAttack,              // victim_id,demo_count,episode,regret,perturbations
  kTransfer,            // victim_id,demo_count,episode,crafted,transferred
  kCrop,                // omega,mean_return,imitation_agreement,mean_transfers
  kTrainingCurve,       // episode,steps,return
  kImitationLog,        // step,loss,agreement
  kImitationSummary,    // victim_id,demo_count,heldout_agreement,rollout_agreement
};

class ReportSchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using ReportCell = std::variant<std::int64_t, double, std::string>;
using ReportRow = std::vector<ReportCell>;

const std::vector<std::string>& ReportHeader(ReportKind kind);
ReportKind ParseReportKind(std::string_view name);

// "%#.6g": 490.73 -> "490.730".
std::string FormatReal(double value);

// Throws ReportSchemaError when a row has the wrong arity or a cell of the
// wrong type for its column.
std::string RenderReport(ReportKind kind, const std::vector<ReportRow>& rows);
void WriteReport(const std::filesystem::path& path, ReportKind kind,
                 const std::vector<ReportRow>& rows);

}  // namespace mlab
