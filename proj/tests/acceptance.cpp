// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Criteria can be selected by
// number on the command line; the exit code reports overall success.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qmdpnet/dataset.hpp"
#include "qmdpnet/errors.hpp"
#include "qmdpnet/evalviz.hpp"
#include "qmdpnet/net.hpp"
#include "qmdpnet/pomdp_file.hpp"
#include "qmdpnet/train.hpp"

using namespace qmdpnet;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double minutes_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count() / 60.0;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

const int kThreads = 2;

// ---------------------------------------------------------------------------

void criterion1() {
    auto t0 = Clock::now();
    DomainConfig config{DomainKind::kGrid, Variant::kDeterministic, 10};
    EvalReport rep = evaluate_reference(config, 500, 3, 1);  // single-threaded per the budget
    const double mins = minutes_since(t0);
    const bool pass = rep.success_rate_pct >= 97.0 && std::fabs(rep.mean_steps_success - 8.8) <= 2.0 &&
                      mins <= 10.0;
    report(1, pass, "QMDP baseline, grid D-10",
           fmt("SR=%.1f%% (>=97), steps=%.2f (8.8+-2), %.1f min single-threaded (<=10)",
               rep.success_rate_pct, rep.mean_steps_success, mins));
}

void criterion2() {
    DomainConfig config{DomainKind::kGrid, Variant::kStochastic, 18};
    EvalReport rep = evaluate_reference(config, 500, 3, kThreads);
    const bool pass =
        rep.success_rate_pct >= 93.0 && std::fabs(rep.mean_steps_success - 23.9) <= 6.0;
    report(2, pass, "QMDP baseline, grid S-18",
           fmt("SR=%.1f%% (>=93), steps=%.2f (23.9+-6)", rep.success_rate_pct,
               rep.mean_steps_success));
}

void criterion3() {
    DomainConfig config{DomainKind::kMaze, Variant::kDeterministic, 29};
    EvalReport rep = evaluate_reference(config, 500, 3, kThreads);
    const bool pass = rep.success_rate_pct >= 50.0 && rep.success_rate_pct <= 76.0;
    report(3, pass, "QMDP baseline, maze D-29",
           fmt("SR=%.1f%% (band [50,76])", rep.success_rate_pct));
}

void criterion4() {
    TabularPomdp model = parse_pomdp_file(std::string(QMDPNET_DATA_DIR) + "/hallway2.pomdp");
    const bool sizes_ok = model.n_states() == 92 && model.n_actions() == 5 && model.n_obs() == 17;
    EvalReport rep = evaluate_pomdp_qmdp(model, 500, 251, 3, kThreads);
    const bool pass = sizes_ok && std::fabs(rep.success_rate_pct - 37.3) <= 10.0;
    report(4, pass, "hallway benchmark via the .pomdp parser",
           fmt("nS=%d nA=%d nO=%d, SR=%.1f%% (37.3+-10) over 500 trials, cap 251",
               model.n_states(), model.n_actions(), model.n_obs(), rep.success_rate_pct));
}

void criterion5() {
    GridEnv env = gen_grid_env(10, 0.25, 404);
    Rng rng(11);
    TaskParams task = sample_task(env, rng);
    TabularPomdp shift = build_shift_invariant_pomdp(env, Variant::kStochastic, task);
    NetConfig cfg = NetConfig::for_domain(DomainKind::kGrid, 10, 10);
    QmdpNetParams params = inject_ground_truth(cfg, shift, env);

    Tensor z = net_z_map(params, task.theta);
    Tensor nb = net_init_belief(cfg, task.theta);
    Belief eb = shift.start_belief();
    int state = task.start_state;
    double worst = 0.0;
    int steps = 0;
    for (int t = 0; t < 1000; ++t) {
        int a;
        do {  // keep the true state on the board so observations stay defined
            a = rng.next_int(5);
            if (a == kGridStay) break;
            int nr = state / 10 + kDirRow[a], nc = state % 10 + kDirCol[a];
            if (nr >= 0 && nr < 10 && nc >= 0 && nc < 10) break;
        } while (true);
        state = shift.sample_next_state(state, a, rng);
        int obs = shift.sample_observation(a, state, rng);
        eb = exact_filter_step(shift, eb, a, obs);
        nb = net_filter_step(params, nb, a, obs, z);
        for (int i = 0; i < nb.numel(); ++i)
            worst = std::max(worst, std::fabs(nb[i] - eb[static_cast<std::size_t>(i)]));
        ++steps;
    }
    report(5, worst < 1e-9 && steps == 1000, "filter oracle equivalence",
           fmt("max |net - exact| = %.2e over %d consecutive steps (< 1e-9)", worst, steps));
}

void criterion6() {
    int episodes = 0, steps = 0, agreed = 0;
    for (int i = 0; i < 100; ++i) {
        GridEnv env = gen_grid_env(10, 0.25, split_seed(606, static_cast<std::uint64_t>(i)));
        Rng rng(split_seed(607, static_cast<std::uint64_t>(i)));
        TaskParams task = sample_task(env, rng);
        TabularPomdp shift = build_shift_invariant_pomdp(env, Variant::kDeterministic, task);
        shift.gamma = 1.0;  // both routes run the same K-step recursion
        ViResult vi = value_iteration(shift, {30, 0.0});

        NetConfig cfg = NetConfig::for_domain(DomainKind::kGrid, 10, 10);
        cfg.k_iters = 30;
        QmdpNetParams params = inject_ground_truth(cfg, shift, env);
        Tensor z = net_z_map(params, task.theta);
        Tensor r = net_r_map(params, task.theta);
        Tensor qk = net_planner(params, r, 30);

        Belief eb = shift.start_belief();
        Tensor nb = net_init_belief(cfg, task.theta);
        int state = task.start_state;
        const int void_s = shift.n_states() - 1;
        ++episodes;
        for (int t = 0; t < 100; ++t) {
            int obs = shift.sample_observation(0, state, rng);
            if (t == 0) {
                eb = bayes_correct(shift, eb, 0, obs);
                nb = net_filter_step(params, nb, cfg.n_actions, obs, z);
            }
            const int ref_action = qmdp_action(vi.q, eb);
            Tensor scores = net_action_scores(params, qk, nb);
            const int net_action = greedy_argmax(scores.vec());
            ++steps;
            if (ref_action == net_action) ++agreed;
            int next = shift.sample_next_state(state, ref_action, rng);
            if (next == void_s) break;  // the board ends here; episode over
            state = next;
            if (is_goal_state(env, task, state)) break;
            int o2 = shift.sample_observation(ref_action, state, rng);
            eb = exact_filter_step(shift, eb, ref_action, o2);
            nb = net_filter_step(params, nb, ref_action, o2, z);
        }
    }
    report(6, steps > 0 && agreed == steps, "action oracle equivalence",
           fmt("%d/%d greedy actions agree across %d episodes (need 100%%)", agreed, steps,
               episodes));
}

void criterion7() {
    double worst = 0.0;
    std::string worst_param;
    int coords = 0;
    for (int c = 0; c < 10; ++c) {
        const std::uint64_t seed = 700 + static_cast<std::uint64_t>(c);
        GridEnv env = gen_grid_env(4, 0.25, seed);
        Rng rng(split_seed(seed, 3));
        TaskParams task = sample_task(env, rng);
        NetConfig cfg = NetConfig::for_domain(DomainKind::kGrid, 4, 4);
        cfg.k_iters = 3;
        QmdpNetParams params = init_params(cfg, seed);
        const int action = rng.next_int(cfg.n_actions);
        const int obs = rng.next_int(cfg.n_task_obs());
        const int label = rng.next_int(cfg.n_actions);

        std::vector<Tensor> tensors;
        std::vector<std::string> names;
        for (const auto& kv : params.parameters()) {
            names.push_back(kv.first);
            tensors.push_back(*kv.second);
        }
        auto build = [&](Graph& g, const std::vector<NodeId>& ids) {
            NetNodes nodes = net_nodes_from_ids(params, ids);
            return g_composed_step_loss(g, params, nodes, task.theta, action, obs, label,
                                        cfg.k_iters);
        };
        GradCheckReport rep = grad_check(build, tensors, 1e-5, 25, seed, &names);
        coords += rep.coords_checked;
        if (rep.max_rel_error > worst) {
            worst = rep.max_rel_error;
            worst_param = rep.worst_param;
        }
    }
    report(7, worst < 1e-3, "gradient integrity of the composed network",
           fmt("max rel. error %.2e at %s over %d coordinates, 10 seeded 4x4 configs (< 1e-3)",
               worst, worst_param.c_str(), coords));
}

void criterion8() {
    auto t0 = Clock::now();
    DomainConfig config{DomainKind::kGrid, Variant::kDeterministic, 10};
    config.fixed_env = true;
    Dataset ds = generate_expert_data(config, 2000, 1, 8, false, kThreads);

    NetConfig net_config = NetConfig::for_domain(DomainKind::kGrid, 10, 10);  // K = 30
    TrainConfig tc;
    tc.batch_size = 10;       // more optimizer steps per pass at this data scale
    tc.learning_rate = 3e-3;
    tc.bptt_window = 4;
    tc.round2_limit = 100;    // single round, L = 100
    tc.fixed_env_mode = true;
    tc.max_epochs = 220;      // pinned from the pilot runs; well inside 4 h
    tc.seed = 1;
    tc.threads = kThreads;
    auto [params, train_rep] = curriculum_train(ds, net_config, tc);

    GridEnv env = config.make_env(0, 8);
    EvalReport rep = evaluate_net_fixed_env(params, env, config.variant, 500, 999, kThreads);
    const double hours = minutes_since(t0) / 60.0;
    const bool pass = rep.success_rate_pct >= 90.0 && hours <= 4.0;
    report(8, pass, "desk-scale learning on the fixed grid",
           fmt("trained SR=%.1f%% over 500 held-out trials (>=90), %d epochs, %.2f h (<=4)",
               rep.success_rate_pct, static_cast<int>(train_rep.epochs.size()), hours));
}

void criterion9() {
    auto rows = reward_shaping_experiment(29, 500, 3, kThreads);
    const EvalReport& orig = rows[0].report;
    const EvalReport& mod2 = rows[2].report;
    const bool pass = std::fabs(orig.success_rate_pct - 63.2) <= 8.0 &&
                      mod2.success_rate_pct >= 85.0 &&
                      mod2.mean_disc_return > orig.mean_disc_return;
    report(9, pass, "reward-shaping experiment",
           fmt("original SR=%.1f%% (63.2+-8), modified-2 SR=%.1f%% (>=85), returns %.2f > %.2f",
               orig.success_rate_pct, mod2.success_rate_pct, mod2.mean_disc_return,
               orig.mean_disc_return));
}

void criterion10() {
    // a tied model trained at K=90 (brief run; transfer needs mechanics, not scores)
    DomainConfig config{DomainKind::kGrid, Variant::kDeterministic, 10};
    config.fixed_env = true;
    Dataset ds = generate_expert_data(config, 300, 1, 8, false, kThreads);
    NetConfig cfg = NetConfig::for_domain(DomainKind::kGrid, 10, 10);
    cfg.k_iters = 90;
    TrainConfig tc;
    tc.batch_size = 10;
    tc.learning_rate = 3e-3;
    tc.fixed_env_mode = true;
    tc.max_epochs = 4;
    tc.seed = 2;
    tc.threads = kThreads;
    auto [params, train_rep] = curriculum_train(ds, cfg, tc);

    const std::uint64_t checksum_before = params_checksum(params);
    GridEnv intel = load_preset_map("intel", QMDPNET_DATA_DIR);
    bool sized = intel.height == 100 && intel.width == 101;

    QmdpNetParams expanded = params;
    expand_k(expanded, 450);
    const bool bit_identical = params_checksum(expanded) == checksum_before;

    bool rollouts_ok = true;
    std::string error;
    int completed = 0;
    try {
        auto results = transfer_eval(params, intel, Variant::kDeterministic, {450}, 20, 7,
                                     kThreads);
        completed = results[0].report.trials;
        rollouts_ok = completed == 20 && params_checksum(params) == checksum_before;
    } catch (const std::exception& e) {
        rollouts_ok = false;
        error = e.what();
    }
    report(10, sized && bit_identical && rollouts_ok, "transfer mechanics K=90 -> K=450",
           fmt("intel %dx%d, params bit-identical=%d, %d/20 rollouts completed %s",
               intel.height, intel.width, bit_identical ? 1 : 0, completed, error.c_str()));
}

void criterion11() {
    std::ostringstream detail;
    bool pass = true;

    {  // belief normalization everywhere along a long stochastic rollout
        GridEnv env = gen_grid_env(10, 0.25, 77);
        Rng rng(5);
        TaskParams task = sample_task(env, rng);
        TabularPomdp shift = build_shift_invariant_pomdp(env, Variant::kStochastic, task);
        NetConfig cfg = NetConfig::for_domain(DomainKind::kGrid, 10, 10);
        QmdpNetParams params = inject_ground_truth(cfg, shift, env);
        Tensor z = net_z_map(params, task.theta);
        Tensor nb = net_init_belief(cfg, task.theta);
        Belief eb = shift.start_belief();
        int state = task.start_state;
        double worst = 0.0;
        for (int t = 0; t < 300; ++t) {
            int a;
            do {
                a = rng.next_int(5);
                if (a == kGridStay) break;
                int nr = state / 10 + kDirRow[a], nc = state % 10 + kDirCol[a];
                if (nr >= 0 && nr < 10 && nc >= 0 && nc < 10) break;
            } while (true);
            state = shift.sample_next_state(state, a, rng);
            int obs = shift.sample_observation(a, state, rng);
            eb = exact_filter_step(shift, eb, a, obs);
            nb = net_filter_step(params, nb, a, obs, z);
            double es = 0.0;
            for (double v : eb) es += v;
            worst = std::max({worst, std::fabs(nb.sum() - 1.0), std::fabs(es - 1.0)});
        }
        pass = pass && worst < 1e-9;
        detail << "norm-dev=" << fmt("%.1e", worst);
    }
    {  // conv adjoint identity
        Rng rng(9);
        double worst = 0.0;
        for (int t = 0; t < 10; ++t) {
            Tensor x({7, 5, 3}), k({3, 3, 3, 4}), y({7, 5, 4});
            for (double& v : x.vec()) v = rng.next_range(-1, 1);
            for (double& v : k.vec()) v = rng.next_range(-1, 1);
            for (double& v : y.vec()) v = rng.next_range(-1, 1);
            Tensor cx = conv2d(x, k);
            Tensor aty = conv2d_backward_input(k, y);
            double lhs = 0, rhs = 0;
            for (int i = 0; i < cx.numel(); ++i) lhs += cx[i] * y[i];
            for (int i = 0; i < x.numel(); ++i) rhs += x[i] * aty[i];
            worst = std::max(worst, std::fabs(lhs - rhs));
        }
        pass = pass && worst < 1e-9;
        detail << ", adjoint-dev=" << fmt("%.1e", worst);
    }
    {  // softmax-kernel constraint after optimizer steps (constrained view)
        NetConfig cfg = NetConfig::for_domain(DomainKind::kGrid, 6, 6);
        cfg.k_iters = 4;
        QmdpNetParams p = init_params(cfg, 3);
        OptState opt = OptState::init(p, 1e-3);
        DomainConfig dcfg{DomainKind::kGrid, Variant::kDeterministic, 6};
        Dataset tiny = generate_expert_data(dcfg, 4, 2, 5, false);
        double worst = 0.0;
        for (int step = 0; step < 3; ++step) {
            std::vector<Tensor> grads;
            for (auto& kv : p.parameters()) grads.push_back(Tensor(kv.second->shape()));
            for (const Trajectory& tr : tiny.trajectories)
                trajectory_loss(p, tr, 10, 4, &grads);
            rmsprop_step(p, grads, opt);
            Tensor k = kernel_softmax(p.ft_logits);
            for (int co = 0; co < cfg.n_actions; ++co) {
                double sum = 0.0;
                for (int dx = 0; dx < 3; ++dx)
                    for (int dy = 0; dy < 3; ++dy) sum += k.at(dx, dy, 0, co);
                worst = std::max(worst, std::fabs(sum - 1.0));
            }
        }
        pass = pass && worst < 1e-9;
        detail << ", kernel-sum-dev=" << fmt("%.1e", worst);
    }
    {  // one-hot soft indexing equals hard indexing
        Rng rng(13);
        Tensor in({6, 6, 10});
        for (double& v : in.vec()) v = rng.next_range(-1, 1);
        double worst = 0.0;
        for (int j = 0; j < 5; ++j) {
            Tensor w({5});
            w[j] = 1.0;
            Tensor soft = group_weighted_channel_sum(in, w, 2);
            for (int x = 0; x < 6; ++x)
                for (int y = 0; y < 6; ++y)
                    for (int g = 0; g < 2; ++g)
                        worst = std::max(worst,
                                         std::fabs(soft.at(x, y, g) - in.at(x, y, g * 5 + j)));
        }
        pass = pass && worst == 0.0;
        detail << ", onehot-dev=" << fmt("%.1e", worst);
    }
    {  // dataset round-trip bit-exactness and deterministic re-runs
        DomainConfig dcfg{DomainKind::kGrid, Variant::kStochastic, 8};
        Dataset a = generate_expert_data(dcfg, 12, 2, 21, true);
        Dataset b = generate_expert_data(dcfg, 12, 2, 21, true);
        const bool rerun_equal = dataset_checksum(a) == dataset_checksum(b);
        save_dataset(a, "/tmp/qmdpnet_acc_ds");
        Dataset loaded = load_dataset("/tmp/qmdpnet_acc_ds");
        const bool roundtrip = dataset_deep_equal(a, loaded);
        EvalReport r1 = evaluate_reference(dcfg, 25, 4, 1);
        EvalReport r2 = evaluate_reference(dcfg, 25, 4, kThreads);
        const bool report_stable = eval_report_json(r1) == eval_report_json(r2);
        pass = pass && rerun_equal && roundtrip && report_stable;
        detail << ", rerun=" << rerun_equal << ", roundtrip=" << roundtrip
               << ", report-stable=" << report_stable;
    }
    report(11, pass, "property suites", detail.str());
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> want;
    for (int i = 1; i < argc; ++i) want.insert(std::atoi(argv[i]));
    auto enabled = [&](int c) { return want.empty() || want.count(c) > 0; };

    if (enabled(1)) criterion1();
    if (enabled(2)) criterion2();
    if (enabled(3)) criterion3();
    if (enabled(4)) criterion4();
    if (enabled(5)) criterion5();
    if (enabled(6)) criterion6();
    if (enabled(7)) criterion7();
    if (enabled(9)) criterion9();
    if (enabled(10)) criterion10();
    if (enabled(11)) criterion11();
    if (enabled(8)) criterion8();  // the long training run goes last

    if (g_failures > 0) std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
