#ifndef QMDPNET_EVALVIZ_HPP
#define QMDPNET_EVALVIZ_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qmdpnet/dataset.hpp"
#include "qmdpnet/domains.hpp"
#include "qmdpnet/net.hpp"
#include "qmdpnet/pomdp.hpp"

namespace qmdpnet {

struct TrialRecord {
    std::uint64_t seed = 0;
    bool success = false;
    int steps = 0;
    double disc_return = 0.0;  // gamma = 0.99 on the original rewards
};

struct EvalReport {
    std::string domain_id;
    int trials = 0;
    int successes = 0;
    double success_rate_pct = 0.0;
    double mean_steps_success = 0.0;  // headline completion time
    double mean_steps_all = 0.0;
    double mean_disc_return = 0.0;
    std::vector<TrialRecord> records;
    std::string config_echo;  // JSON text

    void finish();  // fills the aggregate fields from the records
};

// Deterministic JSON rendering (sorted keys), byte-stable across reruns.
std::string eval_report_json(const EvalReport& report);

// A policy maps the (previous action, observation) stream to actions,
// deterministically given its own episode state.
class Policy {
public:
    virtual ~Policy() = default;
    virtual void reset(const GridEnv& env, Variant variant, const TaskParams& task) = 0;
    // Consumes the pair and returns the next action. May throw
    // DegenerateBeliefError, which the rollout records as a failure.
    virtual int step(int prev_action, int observation) = 0;
};

// Ground-truth model + converged Q table + exact Bayes filter.
class ReferenceQmdpPolicy : public Policy {
public:
    void reset(const GridEnv& env, Variant variant, const TaskParams& task) override;
    int step(int prev_action, int observation) override;

    const TabularPomdp& model() const { return model_; }
    const QTable& q() const { return q_; }

private:
    TabularPomdp model_;
    QTable q_;
    Belief belief_;
    int n_actions_ = 0;
};

// Filter+planner network executed greedily; the planner output and the Z map
// are computed once per episode (theta is constant within it).
class NetPolicy : public Policy {
public:
    explicit NetPolicy(QmdpNetParams params) : params_(std::move(params)) {}
    void reset(const GridEnv& env, Variant variant, const TaskParams& task) override;
    int step(int prev_action, int observation) override;

    const Tensor& belief() const { return belief_; }
    const Tensor& q_map() const { return q_k_; }

private:
    QmdpNetParams params_;
    Tensor z_map_, q_k_, belief_;
};

// Simulates one episode from the sampled start until goal or the step cap.
TrialRecord rollout(Policy& policy, const GridEnv& env, Variant variant, const TaskParams& task,
                    Rng& rng);

// Reference QMDP baseline over freshly generated environments; shares the
// expert pipeline's code path and seed discipline, so its success counts are
// identical to generate_expert_data on the same seeds.
EvalReport evaluate_reference(const DomainConfig& config, int trials, std::uint64_t seed,
                              int threads = 1);

// Learned-policy evaluation over generated environments.
EvalReport evaluate_net(const QmdpNetParams& params, const DomainConfig& config, int trials,
                        std::uint64_t seed, int threads = 1);

// Learned-policy evaluation over the held-out tasks of a test dataset.
EvalReport evaluate_net_on_dataset(const QmdpNetParams& params, const Dataset& dataset,
                                   int trials, std::uint64_t seed);

// QMDP on a parsed tabular model (e.g. the hallway benchmark): trials start
// from the model's start distribution and succeed on entering a terminal
// state within the cap.
EvalReport evaluate_pomdp_qmdp(const TabularPomdp& model, int trials, int cap,
                               std::uint64_t seed, int threads = 1);

// Fixed-environment evaluation: tasks resampled on one board.
EvalReport evaluate_net_fixed_env(const QmdpNetParams& params, const GridEnv& env,
                                  Variant variant, int trials, std::uint64_t seed,
                                  int threads = 1);

struct TransferResult {
    int k = 0;
    EvalReport report;
};
// Expands a tied model to each K and evaluates it on tasks over the map.
std::vector<TransferResult> transfer_eval(const QmdpNetParams& tied_params, const GridEnv& map_env,
                                          Variant variant, const std::vector<int>& k_values,
                                          int trials, std::uint64_t seed, int threads = 1);

struct ShapingRow {
    std::string name;
    EvalReport report;
};
// QMDP policies solved on reward-modified maze models, evaluated on the
// original rewards: original; stay cost x20; stay cost x50 + turn-right
// cost x10.
std::vector<ShapingRow> reward_shaping_experiment(int n, int trials, std::uint64_t seed,
                                                  int threads = 1);

// Writes value-function, per-step belief triplets (exact, predicted,
// absolute difference), constrained transition-kernel slices and per-action
// reward maps as PGM images with CSV mirrors plus a manifest. Grid domains.
std::vector<std::string> emit_visualizations(const QmdpNetParams& params, const GridEnv& env,
                                             Variant variant, const TaskParams& task,
                                             const TabularPomdp& gt_model,
                                             const std::string& out_dir, int max_steps,
                                             std::uint64_t seed);

// Min-max scaling of a 2-D map to 8-bit gray; constant maps become mid-gray.
PgmImage tensor_to_pgm(const Tensor& map2d);
// Absolute scaling for error maps: zero renders black, |v| >= 1 saturates.
PgmImage tensor_to_pgm_absolute(const Tensor& map2d);

}  // namespace qmdpnet

#endif
