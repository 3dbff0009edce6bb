#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "qmdpnet/errors.hpp"
#include "qmdpnet/evalviz.hpp"
#include "qmdpnet/pomdp_file.hpp"

using namespace qmdpnet;
namespace fs = std::filesystem;

namespace {
class StayPolicy : public Policy {
public:
    void reset(const GridEnv& env, Variant, const TaskParams&) override {
        stay_ = env.kind == DomainKind::kMaze ? kMazeStay : kGridStay;
    }
    int step(int, int) override { return stay_; }

private:
    int stay_ = kGridStay;
};

std::map<std::pair<int, int>, double> read_csv(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);  // header
    std::map<std::pair<int, int>, double> out;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string r, c, v;
        std::getline(ss, r, ',');
        std::getline(ss, c, ',');
        std::getline(ss, v, ',');
        out[{std::stoi(r), std::stoi(c)}] = std::stod(v);
    }
    return out;
}
}  // namespace

TEST_CASE("rollout: one step to an adjacent goal; stay policies exhaust the cap") {
    GridEnv env = gen_grid_env(8, 0.0, 4);
    Rng rng(1);
    TaskParams task = sample_task(env, rng, 1);
    // pin start next to the goal
    task.start_state = env.cell(task.goal_row > 0 ? task.goal_row - 1 : 1, task.goal_col);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) task.theta.at(r, c, 2) = 0.0;
    task.theta.at(task.start_state / 8, task.start_state % 8, 2) = 1.0;

    ReferenceQmdpPolicy ref;
    Rng episode(5);
    TrialRecord rec = rollout(ref, env, Variant::kDeterministic, task, episode);
    CHECK(rec.success);
    CHECK(rec.steps == 1);

    StayPolicy stay;
    Rng episode2(6);
    TrialRecord rec2 = rollout(stay, env, Variant::kDeterministic, task, episode2);
    CHECK(!rec2.success);
    CHECK(rec2.steps == step_cap(env));  // failure at exactly 10N steps

    // fixed seed reproduces the record
    Rng e3(9), e4(9);
    ReferenceQmdpPolicy p3, p4;
    TrialRecord a = rollout(p3, env, Variant::kStochastic, task, e3);
    TrialRecord b = rollout(p4, env, Variant::kStochastic, task, e4);
    CHECK(a.success == b.success);
    CHECK(a.steps == b.steps);
    CHECK(a.disc_return == b.disc_return);
}

TEST_CASE("evaluation equals the expert pipeline on the same seeds") {
    DomainConfig config;
    config.kind = DomainKind::kGrid;
    config.variant = Variant::kStochastic;
    config.n = 8;
    const int trials = 60;
    EvalReport rep = evaluate_reference(config, trials, 77);
    Dataset gen = generate_expert_data(config, trials, 1, 77, /*keep_failures=*/true);
    CHECK(rep.successes == gen.manifest.expert_successes);
    CHECK(rep.trials == gen.manifest.expert_attempts);
    // success rate is exactly successes/trials
    CHECK(rep.success_rate_pct == doctest::Approx(100.0 * rep.successes / trials));
}

TEST_CASE("evaluation reports are byte-stable across reruns and thread counts") {
    DomainConfig config;
    config.kind = DomainKind::kGrid;
    config.variant = Variant::kDeterministic;
    config.n = 8;
    EvalReport a = evaluate_reference(config, 40, 5, 1);
    EvalReport b = evaluate_reference(config, 40, 5, 2);
    CHECK(eval_report_json(a) == eval_report_json(b));
}

TEST_CASE("qmdp evaluation on the parsed hallway benchmark") {
    TabularPomdp m = parse_pomdp_file(std::string(QMDPNET_DATA_DIR) + "/hallway2.pomdp");
    EvalReport rep = evaluate_pomdp_qmdp(m, 60, 251, 11);
    CHECK(rep.trials == 60);
    CHECK(rep.success_rate_pct > 15.0);
    CHECK(rep.success_rate_pct < 60.0);
    CHECK(rep.mean_steps_success > 1.0);
}

TEST_CASE("reward shaping: aggressive costs beat the original model") {
    auto rows = reward_shaping_experiment(29, 60, 3, 2);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].name == "original");
    CHECK(rows[2].name == "modified2");
    CHECK(rows[2].report.success_rate_pct > rows[0].report.success_rate_pct);
    CHECK(rows[2].report.mean_disc_return > rows[0].report.mean_disc_return);
}

TEST_CASE("transfer evaluation: depth expands, parameters stay bit-identical") {
    NetConfig cfg = NetConfig::for_domain(DomainKind::kGrid, 10, 10);
    cfg.k_iters = 4;
    cfg.fz_filters = 8;
    cfg.fr_filters = 8;
    QmdpNetParams params = init_params(cfg, 3);
    const std::uint64_t before = params_checksum(params);

    GridEnv map_env = gen_grid_env(12, 0.2, 9);
    auto results = transfer_eval(params, map_env, Variant::kDeterministic, {4, 8, 20}, 3, 7);
    REQUIRE(results.size() == 3);
    CHECK(results[0].k == 4);
    CHECK(results[2].k == 20);
    for (const TransferResult& r : results) CHECK(r.report.trials == 3);
    CHECK(params_checksum(params) == before);

    NetConfig ucfg = NetConfig::for_domain(DomainKind::kGrid, 10, 10, NetVariant::kUntied);
    ucfg.k_iters = 4;
    ucfg.fz_filters = 8;
    ucfg.fr_filters = 8;
    QmdpNetParams untied = init_params(ucfg, 3);
    CHECK_THROWS_AS(transfer_eval(untied, map_env, Variant::kDeterministic, {8}, 1, 1),
                    UnsupportedVariantError);
}

TEST_CASE("constant maps render mid-gray; absolute error maps render black at zero") {
    Tensor flat = Tensor::full({4, 4}, 3.25);
    PgmImage img = tensor_to_pgm(flat);
    for (auto px : img.pixels) CHECK(px == 128);

    Tensor ramp({1, 3}, {0.0, 0.5, 1.0});
    PgmImage r = tensor_to_pgm(ramp);
    CHECK(r.pixels[0] == 0);
    CHECK(r.pixels[2] == 255);

    PgmImage zero = tensor_to_pgm_absolute(Tensor({4, 4}));
    for (auto px : zero.pixels) CHECK(px == 0);
}

TEST_CASE("visualizations: injected model leaves zero belief difference") {
    GridEnv env = gen_grid_env(8, 0.0, 21);
    Rng rng(2);
    TaskParams task = sample_task(env, rng);
    TabularPomdp shift = build_shift_invariant_pomdp(env, Variant::kDeterministic, task);
    NetConfig cfg = NetConfig::for_domain(DomainKind::kGrid, 8, 8);
    cfg.k_iters = 20;
    QmdpNetParams params = inject_ground_truth(cfg, shift, env);

    const std::string dir = (fs::temp_directory_path() / "qmdpnet_viz_test").string();
    fs::remove_all(dir);
    auto files =
        emit_visualizations(params, env, Variant::kDeterministic, task, shift, dir, 4, 3);
    CHECK(!files.empty());
    REQUIRE(fs::exists(dir + "/manifest.json"));
    REQUIRE(fs::exists(dir + "/value_function.pgm"));
    REQUIRE(fs::exists(dir + "/step0_belief_diff.pgm"));

    // belief differences are identically zero under injection
    for (int t = 0; t < 4; ++t) {
        const std::string path = dir + "/step" + std::to_string(t) + "_belief_diff.pgm";
        if (!fs::exists(path)) break;  // episode may end early
        PgmImage img = read_pgm(path);
        for (auto px : img.pixels) CHECK(px == 0);
        for (auto& kv : read_csv(dir + "/step" + std::to_string(t) + "_belief_diff.csv"))
            CHECK(kv.second < 1e-9);
    }

    // the filter kernel for action N lights only the (-1,0) offset
    auto k0 = read_csv(dir + "/ft_kernel_a0.csv");
    CHECK(k0[{0, 1}] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(k0[{1, 1}] == doctest::Approx(0.0).epsilon(1e-9));

    // the value map is brightest at the goal on an obstacle-free board
    auto v = read_csv(dir + "/value_function.csv");
    double best = -1e18;
    std::pair<int, int> best_cell{-1, -1};
    for (auto& kv : v) {
        if (kv.second > best) {
            best = kv.second;
            best_cell = kv.first;
        }
    }
    CHECK(best_cell.first == task.goal_row);
    CHECK(best_cell.second == task.goal_col);
    fs::remove_all(dir);
}

TEST_CASE("report aggregates follow the records") {
    EvalReport rep;
    rep.domain_id = "synthetic";
    rep.records = {{1, true, 5, 1.0}, {2, false, 9, -1.0}, {3, true, 7, 2.0}};
    rep.finish();
    CHECK(rep.trials == 3);
    CHECK(rep.successes == 2);
    CHECK(rep.success_rate_pct == doctest::Approx(200.0 / 3.0));
    CHECK(rep.mean_steps_success == doctest::Approx(6.0));
    CHECK(rep.mean_steps_all == doctest::Approx(7.0));
    CHECK(rep.mean_disc_return == doctest::Approx(2.0 / 3.0));
}
