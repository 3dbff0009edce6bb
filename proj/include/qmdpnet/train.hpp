#ifndef QMDPNET_TRAIN_HPP
#define QMDPNET_TRAIN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "qmdpnet/dataset.hpp"
#include "qmdpnet/net.hpp"

namespace qmdpnet {

struct TrainConfig {
    int batch_size = 100;
    double learning_rate = 1e-3;   // 1e-4 is the untied-variant default
    double rmsprop_decay = 0.9;
    double rmsprop_momentum = 0.0;  // kept at 0
    int bptt_window = 4;
    int round1_limit = 4;    // L1
    int round2_limit = 100;  // L2
    int patience = 30;       // epochs without validation improvement
    double lr_decay = 0.9;
    int max_decay_iters = 15;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;
    int max_epochs = 100000;  // safety bound on top of the decay schedule
    double grad_clip = 0.0;   // global-norm clip, 0 = off
    int threads = 1;
    bool fixed_env_mode = false;  // single round with L = round2_limit

    void validate() const;
};

// Per-parameter running mean-square accumulator plus the decaying rate.
struct OptState {
    std::vector<Tensor> acc;  // parameters() order
    double lr = 1e-3;
    int decay_iters = 0;

    static OptState init(const QmdpNetParams& params, double lr);
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double lr = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::string stop_reason;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    std::vector<EpochRecord> lr_trace;  // epochs where the rate decayed
};

// Mean step cross-entropy of the filter+planner network along one expert
// trajectory, limited to the first `step_limit` steps. Each loss term
// backpropagates through at most `window` filter steps; older beliefs enter
// the term's subgraph as constants. When `grads` is given, d(loss)/d(param)
// is accumulated into it (parameters() order).
double trajectory_loss(const QmdpNetParams& params, const Trajectory& traj, int step_limit,
                       int window, std::vector<Tensor>* grads = nullptr);

// Forward-only loss and greedy-action accuracy (validation).
struct EvalLoss {
    double loss = 0.0;
    int steps = 0;
    int correct = 0;
};
EvalLoss trajectory_eval(const QmdpNetParams& params, const Trajectory& traj, int step_limit);

// acc <- 0.9 acc + 0.1 g^2 ; p <- p - lr * g / sqrt(acc + 1e-10)
void rmsprop_step(QmdpNetParams& params, const std::vector<Tensor>& grads, OptState& opt,
                  double decay = 0.9);

// Epochs of shuffled mini-batches with early stopping: no validation
// improvement for `patience` epochs decays the rate by `lr_decay` and resets
// the patience window; the run stops after `max_decay_iters` decays and
// returns the best-validation parameters.
std::pair<QmdpNetParams, TrainReport> train_round(const QmdpNetParams& start,
                                                  const Dataset& dataset,
                                                  const TrainConfig& config, int round_index);

// Two rounds (L1 then L2, the second starting from the first's parameters);
// fixed-environment mode runs a single round at L2.
std::pair<QmdpNetParams, TrainReport> curriculum_train(const Dataset& dataset,
                                                       const NetConfig& net_config,
                                                       const TrainConfig& train_config);

// Checkpoint directory: model files + OptState tensors + TrainReport JSON.
void save_checkpoint(const QmdpNetParams& params, const OptState& opt, const TrainReport& report,
                     const std::string& directory);

std::string train_report_json(const TrainReport& report);

}  // namespace qmdpnet

#endif
