#include "mlab/crop.h"

#include <stdexcept>

#include "mlab/dqn.h"
#include "mlab/seeds.h"

namespace mlab {

std::vector<int> FeasibleActions(const Eigen::VectorXd& q_values, double omega_max,
                                 bool literal) {
  if (!(omega_max >= 0.0)) throw std::invalid_argument("FeasibleActions: omega < 0");
  const int best = ArgMax(q_values);
  std::vector<int> feasible{best};
  for (int a = 0; a < q_values.size(); ++a) {
    if (a == best) continue;
    const double gap = q_values(best) - q_values(a);
    if (literal ? gap >= omega_max : gap <= omega_max) feasible.push_back(a);
  }
  return feasible;
}

std::vector<int> FeasibleActions(const Network& q, const Observation& s,
                                 double omega_max, bool literal) {
  return FeasibleActions(q.Forward(s), omega_max, literal);
}

Policy MakeCropPolicy(std::shared_ptr<const Network> q, const CropConfig& config) {
  return Policy::Crop(std::move(q), config);
}

CropRow EvaluateDefense(const Policy& defended, std::shared_ptr<const Network> victim_q,
                        const CropEvalConfig& config, std::uint64_t seed) {
  CropRow row;
  row.mean_return =
      EvaluatePolicy(defended, config.return_episodes, DeriveSeed(seed, "crop", "returns"))
          .mean;

  const DemonstrationSet demos = CollectDemonstrations(
      defended, config.demo_count, DeriveSeed(seed, "crop", "demos"));
  DqfdConfig dqfd = config.dqfd;
  dqfd.seed = DeriveSeed(seed, "crop", "imitate");
  dqfd.network.seed = DeriveSeed(seed, "crop", "imitate-init");
  auto imitation = std::make_shared<const Network>(TrainDqfd(demos, dqfd).q);

  const Policy victim = Policy::Greedy(victim_q);
  row.imitation_agreement =
      RolloutAgreement(ImitatedPolicy(imitation), victim, config.agreement_states,
                       DeriveSeed(seed, "crop", "agreement"));
  row.mean_transfers = RunTransferEval(victim, *imitation, config.transfer_episodes,
                                       config.fgsm, DeriveSeed(seed, "crop", "transfer"))
                           .mean_transferred;
  return row;
}

std::vector<CropRow> EvaluateCrop(std::shared_ptr<const Network> victim_q,
                                  const CropEvalConfig& config, std::uint64_t seed) {
  if (config.omegas.empty()) throw std::invalid_argument("EvaluateCrop: empty sweep");
  if (!victim_q) throw std::invalid_argument("EvaluateCrop: null victim");
  std::vector<CropRow> rows;
  for (double omega : config.omegas) {
    CropConfig crop{omega, DeriveSeed(seed, "crop", "policy"), config.literal_inequality};
    CropRow row = EvaluateDefense(MakeCropPolicy(victim_q, crop), victim_q, config, seed);
    row.omega = omega;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mlab
