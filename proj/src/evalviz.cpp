#include "qmdpnet/evalviz.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>

#include "json.hpp"
#include "qmdpnet/errors.hpp"

namespace qmdpnet {

using nlohmann::json;

void EvalReport::finish() {
    trials = static_cast<int>(records.size());
    successes = 0;
    double steps_success = 0.0, steps_all = 0.0, ret = 0.0;
    for (const TrialRecord& r : records) {
        if (r.success) {
            ++successes;
            steps_success += r.steps;
        }
        steps_all += r.steps;
        ret += r.disc_return;
    }
    success_rate_pct = trials > 0 ? 100.0 * successes / trials : 0.0;
    mean_steps_success = successes > 0 ? steps_success / successes : 0.0;
    mean_steps_all = trials > 0 ? steps_all / trials : 0.0;
    mean_disc_return = trials > 0 ? ret / trials : 0.0;
}

std::string eval_report_json(const EvalReport& report) {
    json j;
    j["domain_id"] = report.domain_id;
    j["trials"] = report.trials;
    j["successes"] = report.successes;
    j["success_rate_pct"] = report.success_rate_pct;
    j["mean_steps_success"] = report.mean_steps_success;
    j["mean_steps_all"] = report.mean_steps_all;
    j["mean_disc_return"] = report.mean_disc_return;
    j["config"] = report.config_echo.empty() ? json::object() : json::parse(report.config_echo);
    json recs = json::array();
    for (const TrialRecord& r : report.records) {
        json e;
        e["seed"] = r.seed;
        e["success"] = r.success;
        e["steps"] = r.steps;
        e["disc_return"] = r.disc_return;
        recs.push_back(e);
    }
    j["records"] = recs;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// policies

void ReferenceQmdpPolicy::reset(const GridEnv& env, Variant variant, const TaskParams& task) {
    model_ = build_ground_truth_pomdp(env, variant, task);
    q_ = value_iteration(model_).q;
    belief_ = model_.start_belief();
    n_actions_ = env.n_actions();
}

int ReferenceQmdpPolicy::step(int prev_action, int observation) {
    if (prev_action >= n_actions_) {
        belief_ = bayes_correct(model_, belief_, 0, observation);
    } else {
        belief_ = exact_filter_step(model_, belief_, prev_action, observation);
    }
    return qmdp_action(q_, belief_);
}

void NetPolicy::reset(const GridEnv& env, Variant, const TaskParams& task) {
    params_.config.n_rows = env.height;  // convolutional weights are size-free
    params_.config.n_cols = env.width;
    belief_ = net_init_belief(params_.config, task.theta);
    z_map_ = net_z_map(params_, task.theta);
    Tensor r_map = net_r_map(params_, task.theta);
    q_k_ = net_planner(params_, r_map, params_.config.k_iters);
}

int NetPolicy::step(int prev_action, int observation) {
    belief_ = net_filter_step(params_, belief_, prev_action, observation, z_map_);
    Tensor scores = net_action_scores(params_, q_k_, belief_);
    return greedy_argmax(scores.vec());
}

// ---------------------------------------------------------------------------
// rollouts

TrialRecord rollout(Policy& policy, const GridEnv& env, Variant variant, const TaskParams& task,
                    Rng& rng) {
    policy.reset(env, variant, task);
    TrialRecord rec;
    const int cap = step_cap(env);
    int state = task.start_state;
    int prev = reset_prev_action(env);
    int obs = env_reset_observation(env, variant, state, rng);
    std::vector<double> rewards;
    for (int t = 0; t < cap; ++t) {
        int a;
        try {
            a = policy.step(prev, obs);
        } catch (const DegenerateBeliefError&) {
            break;  // filter lost the episode; counts as failure
        }
        if (a < 0 || a >= env.n_actions())
            throw std::runtime_error("rollout: policy emitted an invalid action index");
        StepResult sr = env_step(env, variant, task, state, a, rng);
        rewards.push_back(sr.reward);
        state = sr.next_state;
        ++rec.steps;
        if (sr.done) {
            rec.success = true;
            break;
        }
        prev = a;
        obs = sr.observation;
    }
    rec.disc_return = discounted_return(rewards, 0.99);
    return rec;
}

namespace {
std::string domain_id_of(const DomainConfig& c) {
    std::string id = domain_kind_name(c.kind);
    if (c.kind != DomainKind::kGrasp)
        id += std::string("-") + (c.variant == Variant::kDeterministic ? "d" : "s") + "-" +
              std::to_string(c.n);
    if (c.fixed_env) id += "-fixed";
    return id;
}

void run_trials(int trials, int threads, const std::function<TrialRecord(int)>& one,
                EvalReport& report) {
    report.records.assign(static_cast<std::size_t>(trials), {});
    if (threads <= 1) {
        for (int i = 0; i < trials; ++i) report.records[static_cast<std::size_t>(i)] = one(i);
    } else {
        std::atomic_int next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&]() {
                for (int i = next.fetch_add(1); i < trials; i = next.fetch_add(1))
                    report.records[static_cast<std::size_t>(i)] = one(i);
            });
        for (auto& th : pool) th.join();
    }
    report.finish();
}
}  // namespace

EvalReport evaluate_reference(const DomainConfig& config, int trials, std::uint64_t seed,
                              int threads) {
    EvalReport rep;
    rep.domain_id = domain_id_of(config) + "-qmdp";
    auto one = [&](int i) {
        // mirror generate_expert_data's per-environment seed discipline
        GridEnv env = config.make_env(i, seed);
        Rng rng(split_seed(seed ^ 0x7261742a31ULL, static_cast<std::uint64_t>(i)));
        TaskParams task = sample_task(env, rng);
        TabularPomdp model = build_ground_truth_pomdp(env, config.variant, task);
        ViResult vi = value_iteration(model);
        ExpertRollout roll = run_expert_episode(env, config.variant, task, model, vi.q, rng);
        TrialRecord rec;
        rec.seed = split_seed(seed ^ 0x7261742a31ULL, static_cast<std::uint64_t>(i));
        rec.success = roll.trajectory.success;
        rec.steps = roll.trajectory.length();
        rec.disc_return = discounted_return(roll.rewards, 0.99);
        return rec;
    };
    run_trials(trials, threads, one, rep);
    return rep;
}

EvalReport evaluate_net(const QmdpNetParams& params, const DomainConfig& config, int trials,
                        std::uint64_t seed, int threads) {
    EvalReport rep;
    rep.domain_id = domain_id_of(config) + "-net";
    auto one = [&](int i) {
        GridEnv env = config.make_env(i, seed);
        Rng rng(split_seed(seed ^ 0x7261742a31ULL, static_cast<std::uint64_t>(i)));
        TaskParams task = sample_task(env, rng);
        NetPolicy policy(params);
        TrialRecord rec = rollout(policy, env, config.variant, task, rng);
        rec.seed = split_seed(seed ^ 0x7261742a31ULL, static_cast<std::uint64_t>(i));
        return rec;
    };
    run_trials(trials, threads, one, rep);
    return rep;
}

EvalReport evaluate_net_on_dataset(const QmdpNetParams& params, const Dataset& dataset,
                                   int trials, std::uint64_t seed) {
    EvalReport rep;
    rep.domain_id = domain_id_of(DomainConfig{dataset.manifest.kind, dataset.manifest.variant,
                                              dataset.manifest.n}) +
                    "-net-testset";
    const int n = std::min<int>(trials, static_cast<int>(dataset.trajectories.size()));
    auto one = [&](int i) {
        const Trajectory& tr = dataset.trajectories[static_cast<std::size_t>(i)];
        const GridEnv& env = dataset.envs[static_cast<std::size_t>(tr.env_index)];
        Rng rng(split_seed(seed, static_cast<std::uint64_t>(i)));
        NetPolicy policy(params);
        TrialRecord rec = rollout(policy, env, dataset.manifest.variant, tr.task, rng);
        rec.seed = split_seed(seed, static_cast<std::uint64_t>(i));
        return rec;
    };
    run_trials(n, 1, one, rep);
    return rep;
}

EvalReport evaluate_net_fixed_env(const QmdpNetParams& params, const GridEnv& env,
                                  Variant variant, int trials, std::uint64_t seed, int threads) {
    EvalReport rep;
    rep.domain_id = "fixed-env-net";
    auto one = [&](int i) {
        Rng rng(split_seed(seed ^ 0x66697865ULL, static_cast<std::uint64_t>(i)));
        TaskParams task = sample_task(env, rng);
        NetPolicy policy(params);
        TrialRecord rec = rollout(policy, env, variant, task, rng);
        rec.seed = split_seed(seed ^ 0x66697865ULL, static_cast<std::uint64_t>(i));
        return rec;
    };
    run_trials(trials, threads, one, rep);
    return rep;
}

EvalReport evaluate_pomdp_qmdp(const TabularPomdp& model, int trials, int cap,
                               std::uint64_t seed, int threads) {
    EvalReport rep;
    rep.domain_id = "pomdp-qmdp";
    ViResult vi = value_iteration(model);  // shared across trials
    auto one = [&](int i) {
        Rng rng(split_seed(seed ^ 0x706f6d6470ULL, static_cast<std::uint64_t>(i)));
        TrialRecord rec;
        rec.seed = split_seed(seed ^ 0x706f6d6470ULL, static_cast<std::uint64_t>(i));
        int state = model.sample_start(rng);
        Belief belief = model.start_belief();
        if (model.is_terminal(state)) {
            rec.success = true;
            return rec;
        }
        int obs = model.sample_observation(0, state, rng);
        std::vector<double> rewards;
        try {
            belief = bayes_correct(model, belief, 0, obs);
            for (int t = 0; t < cap; ++t) {
                const int a = qmdp_action(vi.q, belief);
                rewards.push_back(model.r(state, a));
                const int next = model.sample_next_state(state, a, rng);
                const int o = model.sample_observation(a, next, rng);
                state = next;
                ++rec.steps;
                if (model.is_terminal(state)) {
                    rec.success = true;
                    break;
                }
                belief = exact_filter_step(model, belief, a, o);
            }
        } catch (const DegenerateBeliefError&) {
            // failure
        }
        rec.disc_return = discounted_return(rewards, 0.99);
        return rec;
    };
    run_trials(trials, threads, one, rep);
    return rep;
}

std::vector<TransferResult> transfer_eval(const QmdpNetParams& tied_params,
                                          const GridEnv& map_env, Variant variant,
                                          const std::vector<int>& k_values, int trials,
                                          std::uint64_t seed, int threads) {
    if (tied_params.config.variant == NetVariant::kUntied)
        throw UnsupportedVariantError("transfer_eval: untied planner layers cannot be expanded");
    std::vector<TransferResult> out;
    for (int k : k_values) {
        QmdpNetParams expanded = tied_params;
        expand_k(expanded, k);
        TransferResult res;
        res.k = k;
        res.report.domain_id = "transfer-k" + std::to_string(k);
        auto one = [&](int i) {
            Rng rng(split_seed(seed ^ 0x7472616eULL, static_cast<std::uint64_t>(i)));
            TaskParams task = sample_task(map_env, rng);
            NetPolicy policy(expanded);
            TrialRecord rec = rollout(policy, map_env, variant, task, rng);
            rec.seed = split_seed(seed ^ 0x7472616eULL, static_cast<std::uint64_t>(i));
            return rec;
        };
        run_trials(trials, threads, one, res.report);
        out.push_back(std::move(res));
    }
    return out;
}

std::vector<ShapingRow> reward_shaping_experiment(int n, int trials, std::uint64_t seed,
                                                  int threads) {
    struct VariantSpec {
        const char* name;
        double stay_scale;
        double turn_right_scale;
    };
    static const VariantSpec variants[3] = {
        {"original", 1.0, 1.0}, {"modified1", 20.0, 1.0}, {"modified2", 50.0, 10.0}};

    std::vector<ShapingRow> rows(3);
    for (int v = 0; v < 3; ++v) {
        rows[static_cast<std::size_t>(v)].name = variants[v].name;
        rows[static_cast<std::size_t>(v)].report.domain_id =
            std::string("maze-d-") + std::to_string(n) + "-shaping-" + variants[v].name;
    }

    for (int v = 0; v < 3; ++v) {
        const VariantSpec& spec = variants[v];
        auto one = [&](int i) {
            GridEnv env = gen_maze_env(n, split_seed(seed, static_cast<std::uint64_t>(i)));
            Rng rng(split_seed(seed ^ 0x736861706531ULL, static_cast<std::uint64_t>(i)));
            TaskParams task = sample_task(env, rng);
            TabularPomdp model = build_ground_truth_pomdp(env, Variant::kDeterministic, task);
            TabularPomdp shaped = model;  // planner sees scaled costs, world keeps the original
            for (int s = 0; s < shaped.n_states(); ++s) {
                if (shaped.is_terminal(s)) continue;
                shaped.r(s, kMazeStay) *= spec.stay_scale;
                shaped.r(s, kMazeTurnRight) *= spec.turn_right_scale;
            }
            ViResult vi = value_iteration(shaped);
            ExpertRollout roll =
                run_expert_episode(env, Variant::kDeterministic, task, model, vi.q, rng);
            TrialRecord rec;
            rec.seed = split_seed(seed, static_cast<std::uint64_t>(i));
            rec.success = roll.trajectory.success;
            rec.steps = roll.trajectory.length();
            rec.disc_return = discounted_return(roll.rewards, 0.99);
            return rec;
        };
        run_trials(trials, threads, one, rows[static_cast<std::size_t>(v)].report);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// visualization

PgmImage tensor_to_pgm(const Tensor& map2d) {
    if (map2d.rank() != 2) throw std::invalid_argument("tensor_to_pgm: rank-2 tensor required");
    PgmImage img;
    img.height = map2d.dim(0);
    img.width = map2d.dim(1);
    img.pixels.assign(static_cast<std::size_t>(img.height) * img.width, 128);
    double lo = map2d[0], hi = map2d[0];
    for (int i = 0; i < map2d.numel(); ++i) {
        lo = std::min(lo, map2d[i]);
        hi = std::max(hi, map2d[i]);
    }
    if (hi - lo < 1e-12) return img;  // constant map stays mid-gray
    for (int i = 0; i < map2d.numel(); ++i) {
        double u = (map2d[i] - lo) / (hi - lo);
        img.pixels[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(std::lround(255.0 * u));
    }
    return img;
}

// Absolute scaling for error maps: |v| of 1 saturates, zero stays black.
PgmImage tensor_to_pgm_absolute(const Tensor& map2d) {
    PgmImage img;
    img.height = map2d.dim(0);
    img.width = map2d.dim(1);
    img.pixels.assign(static_cast<std::size_t>(img.height) * img.width, 0);
    for (int i = 0; i < map2d.numel(); ++i) {
        double u = std::min(1.0, std::fabs(map2d[i]));
        img.pixels[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(std::lround(255.0 * u));
    }
    return img;
}

namespace {
void write_csv(const Tensor& map2d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("viz: cannot write " + path);
    out << "row,col,value\n";
    char buf[64];
    for (int r = 0; r < map2d.dim(0); ++r)
        for (int c = 0; c < map2d.dim(1); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", map2d.at(r, c));
            out << r << "," << c << "," << buf << "\n";
        }
}

void emit_map(const Tensor& map2d, const std::string& stem, const std::string& dir,
              std::vector<std::string>& files) {
    write_pgm(tensor_to_pgm(map2d), dir + "/" + stem + ".pgm");
    write_csv(map2d, dir + "/" + stem + ".csv");
    files.push_back(stem + ".pgm");
    files.push_back(stem + ".csv");
}

Tensor belief_image(const Belief& b, int h, int w) {
    Tensor img({h, w});
    for (int i = 0; i < h * w; ++i) img[i] = b[static_cast<std::size_t>(i)];
    return img;
}
}  // namespace

std::vector<std::string> emit_visualizations(const QmdpNetParams& params, const GridEnv& env,
                                             Variant variant, const TaskParams& task,
                                             const TabularPomdp& gt_model,
                                             const std::string& out_dir, int max_steps,
                                             std::uint64_t seed) {
    if (env.orientations != 1)
        throw std::invalid_argument("emit_visualizations: grid domains only");
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> files;
    const int h = env.height, w = env.width;

    // value function of the planner at configured depth
    Tensor r_map = net_r_map(params, task.theta);
    Tensor q_k = net_planner(params, r_map, params.config.k_iters);
    Tensor v = channel_group_max(q_k, 1);
    emit_map(v.reshaped({h, w}), "value_function", out_dir, files);

    // constrained transition kernels of filter and planner
    Tensor ftk = kernel_softmax(params.ft_logits);
    Tensor ftpk = params.config.variant == NetVariant::kUntied
                      ? params.ftp_logits[0]
                      : kernel_softmax(params.ftp_logits[0]);
    const int k = params.config.ft_kernel;
    for (int a = 0; a < params.config.n_actions; ++a) {
        Tensor slice({k, k}), slice_p({k, k});
        for (int dx = 0; dx < k; ++dx)
            for (int dy = 0; dy < k; ++dy) {
                slice.at(dx, dy) = ftk.at(dx, dy, 0, a);
                slice_p.at(dx, dy) = ftpk.at(dx, dy, 0, a);
            }
        emit_map(slice, "ft_kernel_a" + std::to_string(a), out_dir, files);
        emit_map(slice_p, "ftp_kernel_a" + std::to_string(a), out_dir, files);
    }

    // per-action reward maps
    for (int a = 0; a < params.config.n_actions; ++a) {
        Tensor slice({h, w});
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) slice.at(r, c) = r_map.at(r, c, a);
        emit_map(slice, "reward_a" + std::to_string(a), out_dir, files);
    }

    // belief propagation: exact (ground-truth model) vs predicted, plus |diff|
    Rng rng(seed);
    NetPolicy policy(params);
    policy.reset(env, variant, task);
    Belief exact = gt_model.start_belief();
    int state = task.start_state;
    int prev = reset_prev_action(env);
    int obs = env_reset_observation(env, variant, state, rng);
    const int steps = std::min(max_steps, step_cap(env));
    for (int t = 0; t < steps; ++t) {
        int a = policy.step(prev, obs);
        if (prev >= env.n_actions()) {
            exact = bayes_correct(gt_model, exact, 0, obs);
        } else {
            exact = exact_filter_step(gt_model, exact, prev, obs);
        }
        Tensor pred({h, w});
        for (int i = 0; i < h * w; ++i) pred[i] = policy.belief()[i];
        Tensor truth = belief_image(exact, h, w);
        Tensor diff({h, w});
        for (int i = 0; i < h * w; ++i) diff[i] = std::fabs(truth[i] - pred[i]);
        const std::string tag = "step" + std::to_string(t);
        emit_map(truth, tag + "_belief_true", out_dir, files);
        emit_map(pred, tag + "_belief_pred", out_dir, files);
        write_pgm(tensor_to_pgm_absolute(diff), out_dir + "/" + tag + "_belief_diff.pgm");
        write_csv(diff, out_dir + "/" + tag + "_belief_diff.csv");
        files.push_back(tag + "_belief_diff.pgm");
        files.push_back(tag + "_belief_diff.csv");

        StepResult sr = env_step(env, variant, task, state, a, rng);
        state = sr.next_state;
        if (sr.done) break;
        prev = a;
        obs = sr.observation;
    }

    json manifest;
    manifest["files"] = files;
    manifest["k_iters"] = params.config.k_iters;
    manifest["steps"] = steps;
    std::ofstream out(out_dir + "/manifest.json", std::ios::binary);
    if (!out) throw FormatError("viz: cannot write manifest");
    out << manifest.dump(2) << "\n";
    files.push_back("manifest.json");
    return files;
}

}  // namespace qmdpnet
