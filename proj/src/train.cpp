#include "qmdpnet/train.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "json.hpp"
#include "qmdpnet/errors.hpp"
#include "qmdpnet/qntd.hpp"

namespace qmdpnet {

using nlohmann::json;

void TrainConfig::validate() const {
    if (batch_size <= 0 || learning_rate <= 0.0 || bptt_window <= 0 || patience <= 0 ||
        max_decay_iters <= 0 || round1_limit <= 0 || round2_limit <= 0)
        throw ConfigError("TrainConfig: fields must be positive");
    if (bptt_window > round2_limit)
        throw ConfigError("TrainConfig: window must not exceed the step limit");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ConfigError("TrainConfig: validation fraction must be in (0,1)");
}

OptState OptState::init(const QmdpNetParams& params, double lr) {
    OptState s;
    s.lr = lr;
    for (const auto& kv : params.parameters()) s.acc.push_back(Tensor(kv.second->shape()));
    return s;
}

double trajectory_loss(const QmdpNetParams& params, const Trajectory& traj, int step_limit,
                       int window, std::vector<Tensor>* grads) {
    if (traj.steps.empty()) throw std::invalid_argument("trajectory_loss: empty trajectory");
    const NetConfig& cfg = params.config;
    const int steps = std::min<int>(step_limit, traj.length());

    // numeric belief chain (kept outside the tape; windows restart from it)
    std::vector<Tensor> chain;  // chain[t] = belief before step t's update
    chain.push_back(net_init_belief(cfg, traj.task.theta));
    Tensor z_plain = net_z_map(params, traj.task.theta);
    for (int t = 0; t + 1 < steps; ++t) {
        const TrajStep& st = traj.steps[static_cast<std::size_t>(t)];
        chain.push_back(
            net_filter_step(params, chain.back(), st.prev_action, st.observation, z_plain));
    }

    Graph g;
    NetNodes nodes = g_register_params(g, params);
    NodeId theta = g.constant(traj.task.theta);
    NodeId z_map = g_z_map(g, params, nodes, theta);
    NodeId r_map = g_r_map(g, params, nodes, theta);
    NodeId q_k = g_planner(g, params, nodes, r_map, cfg.k_iters);

    NodeId loss_sum = -1;
    for (int t = 0; t < steps; ++t) {
        const int ws = std::max(0, t - window + 1);
        NodeId b = g.constant(chain[static_cast<std::size_t>(ws)]);
        for (int u = ws; u <= t; ++u) {
            const TrajStep& st = traj.steps[static_cast<std::size_t>(u)];
            b = g_filter_step(g, params, nodes, b, st.prev_action, st.observation, z_map);
        }
        NodeId probs = g_action_probs(g, params, nodes, q_k, b);
        NodeId term =
            g.cross_entropy(probs, traj.steps[static_cast<std::size_t>(t)].expert_action);
        loss_sum = loss_sum < 0 ? term : g.add(loss_sum, term);
    }
    NodeId loss = g.scale(loss_sum, 1.0 / steps);

    if (grads) {
        g.backward(loss);
        const auto named = nodes.named();
        if (grads->empty()) {
            for (const auto& kv : named) grads->push_back(g.grad(kv.second));
        } else {
            for (std::size_t i = 0; i < named.size(); ++i) {
                const Tensor& gi = g.grad(named[i].second);
                Tensor& acc = (*grads)[i];
                for (int j = 0; j < gi.numel(); ++j) acc[j] += gi[j];
            }
        }
    }
    return g.value(loss)[0];
}

EvalLoss trajectory_eval(const QmdpNetParams& params, const Trajectory& traj, int step_limit) {
    const NetConfig& cfg = params.config;
    const int steps = std::min<int>(step_limit, traj.length());
    EvalLoss out;
    Tensor z = net_z_map(params, traj.task.theta);
    Tensor r = net_r_map(params, traj.task.theta);
    Tensor q_k = net_planner(params, r, cfg.k_iters);
    Tensor b = net_init_belief(cfg, traj.task.theta);
    for (int t = 0; t < steps; ++t) {
        const TrajStep& st = traj.steps[static_cast<std::size_t>(t)];
        b = net_filter_step(params, b, st.prev_action, st.observation, z);
        Tensor scores = net_action_scores(params, q_k, b);
        Tensor probs = softmax_vec(scores);
        out.loss += cross_entropy(probs, st.expert_action);
        out.correct += greedy_argmax(scores.vec()) == st.expert_action ? 1 : 0;
        ++out.steps;
    }
    if (out.steps > 0) out.loss /= out.steps;
    return out;
}

void rmsprop_step(QmdpNetParams& params, const std::vector<Tensor>& grads, OptState& opt,
                  double decay) {
    auto ps = params.parameters();
    if (grads.size() != ps.size() || opt.acc.size() != ps.size())
        throw std::invalid_argument("rmsprop_step: gradient/parameter shape mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Tensor& p = *ps[i].second;
        const Tensor& g = grads[i];
        Tensor& acc = opt.acc[i];
        if (!g.same_shape(p))
            throw std::invalid_argument("rmsprop_step: gradient shape mismatch for " + ps[i].first);
        for (int j = 0; j < p.numel(); ++j) {
            const double gj = g[j];
            if (!std::isfinite(gj))
                throw std::runtime_error("rmsprop_step: non-finite gradient in " + ps[i].first);
            acc[j] = decay * acc[j] + (1.0 - decay) * gj * gj;
            p[j] -= opt.lr * gj / std::sqrt(acc[j] + 1e-10);
        }
    }
}

namespace {
double global_norm(const std::vector<Tensor>& grads) {
    double s = 0.0;
    for (const Tensor& g : grads)
        for (double v : g.vec()) s += v * v;
    return std::sqrt(s);
}

struct ValScore {
    double loss = 0.0;
    double accuracy = 0.0;
};

ValScore validate(const QmdpNetParams& params, const Dataset& ds, const std::vector<int>& idx,
                  int step_limit, int threads) {
    std::vector<EvalLoss> partial(idx.size());
    auto work = [&](std::size_t i) {
        partial[i] =
            trajectory_eval(params, ds.trajectories[static_cast<std::size_t>(idx[i])], step_limit);
    };
    if (threads <= 1) {
        for (std::size_t i = 0; i < idx.size(); ++i) work(i);
    } else {
        std::atomic_size_t next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&]() {
                for (std::size_t i = next.fetch_add(1); i < idx.size(); i = next.fetch_add(1))
                    work(i);
            });
        for (auto& th : pool) th.join();
    }
    ValScore v;
    double loss_sum = 0.0;
    int steps = 0, correct = 0;
    for (const EvalLoss& e : partial) {
        loss_sum += e.loss * e.steps;
        steps += e.steps;
        correct += e.correct;
    }
    if (steps > 0) {
        v.loss = loss_sum / steps;
        v.accuracy = static_cast<double>(correct) / steps;
    }
    return v;
}
}  // namespace

std::pair<QmdpNetParams, TrainReport> train_round(const QmdpNetParams& start,
                                                  const Dataset& dataset,
                                                  const TrainConfig& config, int round_index) {
    config.validate();
    if (dataset.train_idx.empty() || dataset.val_idx.empty())
        throw std::invalid_argument("train_round: dataset split is missing");
    const int step_limit = round_index == 1 && !config.fixed_env_mode ? config.round1_limit
                                                                      : config.round2_limit;
    const int window = std::min(config.bptt_window, step_limit);

    if (static_cast<int>(dataset.train_idx.size()) < config.batch_size)
        std::cerr << "train_round: dataset smaller than one batch ("
                  << dataset.train_idx.size() << " trajectories); using one undersized batch\n";

    QmdpNetParams params = start;
    OptState opt = OptState::init(params, config.learning_rate);
    QmdpNetParams best = params;
    TrainReport report;
    double best_val = INFINITY;
    int since_improve = 0;

    Rng shuffle_rng(config.seed ^ (0x726f756e64ULL + static_cast<std::uint64_t>(round_index)));
    std::vector<int> order = dataset.train_idx;

    const auto param_list = params.parameters();
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.next_below(i))]);

        double train_loss = 0.0;
        int supervised = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t b1 =
                std::min(order.size(), b0 + static_cast<std::size_t>(config.batch_size));
            const int batch_n = static_cast<int>(b1 - b0);

            std::vector<Tensor> grads;
            for (const auto& kv : param_list) grads.push_back(Tensor(kv.second->shape()));

            if (config.threads <= 1) {
                for (std::size_t i = b0; i < b1; ++i) {
                    const Trajectory& tr =
                        dataset.trajectories[static_cast<std::size_t>(order[i])];
                    double l = trajectory_loss(params, tr, step_limit, window, &grads);
                    train_loss += l * std::min<int>(step_limit, tr.length());
                    supervised += std::min<int>(step_limit, tr.length());
                }
            } else {
                // per-trajectory gradients in slot order, reduced sequentially
                std::vector<std::vector<Tensor>> slot(static_cast<std::size_t>(batch_n));
                std::vector<double> losses(static_cast<std::size_t>(batch_n), 0.0);
                std::atomic_int next{0};
                std::vector<std::thread> pool;
                for (int t = 0; t < config.threads; ++t)
                    pool.emplace_back([&]() {
                        for (int i = next.fetch_add(1); i < batch_n; i = next.fetch_add(1)) {
                            const Trajectory& tr = dataset.trajectories[static_cast<std::size_t>(
                                order[b0 + static_cast<std::size_t>(i)])];
                            losses[static_cast<std::size_t>(i)] = trajectory_loss(
                                params, tr, step_limit, window,
                                &slot[static_cast<std::size_t>(i)]);
                        }
                    });
                for (auto& th : pool) th.join();
                for (int i = 0; i < batch_n; ++i) {
                    const Trajectory& tr = dataset.trajectories[static_cast<std::size_t>(
                        order[b0 + static_cast<std::size_t>(i)])];
                    train_loss += losses[static_cast<std::size_t>(i)] *
                                  std::min<int>(step_limit, tr.length());
                    supervised += std::min<int>(step_limit, tr.length());
                    for (std::size_t p = 0; p < grads.size(); ++p) {
                        const Tensor& gi = slot[static_cast<std::size_t>(i)][p];
                        for (int j = 0; j < gi.numel(); ++j) grads[p][j] += gi[j];
                    }
                }
            }
            for (Tensor& g : grads)
                for (double& v : g.vec()) v /= batch_n;
            if (config.grad_clip > 0.0) {
                const double norm = global_norm(grads);
                if (norm > config.grad_clip) {
                    const double s = config.grad_clip / norm;
                    for (Tensor& g : grads)
                        for (double& v : g.vec()) v *= s;
                }
            }
            rmsprop_step(params, grads, opt, config.rmsprop_decay);
        }

        ValScore val = validate(params, dataset, dataset.val_idx, step_limit, config.threads);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = supervised > 0 ? train_loss / supervised : 0.0;
        rec.val_loss = val.loss;
        rec.val_accuracy = val.accuracy;
        rec.lr = opt.lr;
        report.epochs.push_back(rec);
        std::cerr << "train round " << round_index << " epoch " << epoch << ": train "
                  << rec.train_loss << ", val " << rec.val_loss << ", acc " << rec.val_accuracy
                  << ", lr " << rec.lr << "\n";

        if (val.loss < best_val) {
            best_val = val.loss;
            best = params;
            report.best_epoch = epoch;
            since_improve = 0;
        } else {
            ++since_improve;
        }
        if (since_improve >= config.patience) {
            opt.lr *= config.lr_decay;
            ++opt.decay_iters;
            since_improve = 0;
            report.lr_trace.push_back(rec);
            if (opt.decay_iters >= config.max_decay_iters) {
                report.stop_reason = "lr decay budget exhausted";
                break;
            }
        }
        if (epoch == config.max_epochs) report.stop_reason = "max epochs reached";
    }
    report.best_val_loss = best_val;
    if (report.stop_reason.empty()) report.stop_reason = "max epochs reached";
    return {best, report};
}

std::pair<QmdpNetParams, TrainReport> curriculum_train(const Dataset& dataset,
                                                       const NetConfig& net_config,
                                                       const TrainConfig& train_config) {
    Dataset ds = dataset;  // split locally when missing
    if (ds.train_idx.empty() || ds.val_idx.empty())
        split_train_val(ds, train_config.val_fraction, train_config.seed ^ 0x73706c6974ULL);

    QmdpNetParams params = init_params(net_config, train_config.seed);
    if (train_config.fixed_env_mode) {
        auto [trained, report] = train_round(params, ds, train_config, 2);
        return {trained, report};
    }
    auto [round1, report1] = train_round(params, ds, train_config, 1);
    auto [round2, report2] = train_round(round1, ds, train_config, 2);
    TrainReport merged = report1;
    for (EpochRecord r : report2.epochs) {
        r.epoch += report1.epochs.empty() ? 0 : report1.epochs.back().epoch;
        merged.epochs.push_back(r);
    }
    merged.stop_reason = report2.stop_reason;
    merged.best_epoch = report2.best_epoch;
    merged.best_val_loss = report2.best_val_loss;
    return {round2, merged};
}

std::string train_report_json(const TrainReport& report) {
    json j;
    j["stop_reason"] = report.stop_reason;
    j["best_epoch"] = report.best_epoch;
    j["best_val_loss"] = report.best_val_loss;
    json epochs = json::array();
    for (const EpochRecord& r : report.epochs) {
        json e;
        e["epoch"] = r.epoch;
        e["train_loss"] = r.train_loss;
        e["val_loss"] = r.val_loss;
        e["val_accuracy"] = r.val_accuracy;
        e["lr"] = r.lr;
        epochs.push_back(e);
    }
    j["epochs"] = epochs;
    json decays = json::array();
    for (const EpochRecord& r : report.lr_trace) decays.push_back(r.epoch);
    j["lr_decay_epochs"] = decays;
    return j.dump(2);
}

void save_checkpoint(const QmdpNetParams& params, const OptState& opt, const TrainReport& report,
                     const std::string& directory) {
    save_model(params, directory);
    std::filesystem::create_directories(directory);
    const auto ps = params.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        std::vector<float> data(static_cast<std::size_t>(opt.acc[i].numel()));
        for (int j = 0; j < opt.acc[i].numel(); ++j)
            data[static_cast<std::size_t>(j)] = static_cast<float>(opt.acc[i][j]);
        write_qntd_f32(directory + "/opt_" + ps[i].first + ".qntd", opt.acc[i].shape(), data);
    }
    std::ofstream out(directory + "/train_report.json", std::ios::binary);
    out << train_report_json(report) << "\n";
}

}  // namespace qmdpnet
