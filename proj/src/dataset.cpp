#include "qmdpnet/dataset.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "json.hpp"
#include "qmdpnet/errors.hpp"
#include "qmdpnet/pomdp_file.hpp"
#include "qmdpnet/qntd.hpp"

namespace qmdpnet {

namespace fs = std::filesystem;
using nlohmann::json;

GridEnv DomainConfig::make_env(int index, std::uint64_t master_seed) const {
    const std::uint64_t env_seed = split_seed(master_seed, fixed_env ? 0 : static_cast<std::uint64_t>(index));
    switch (kind) {
        case DomainKind::kGrid:
            return gen_grid_env(n, p_obstacle, env_seed);
        case DomainKind::kMaze:
            return gen_maze_env(n, env_seed);
        case DomainKind::kGrasp: {
            std::vector<int> ids = objects;
            if (ids.empty())
                for (int i = 0; i < kGraspTrainObjects; ++i) ids.push_back(i);
            const int which = fixed_env ? 0 : index;
            return gen_grasp_env(ids[static_cast<std::size_t>(which) % ids.size()], env_seed);
        }
        case DomainKind::kHallway2Grid: {
            if (hallway2_pomdp.empty())
                throw ConfigError("hallway2grid requires the canonical .pomdp file path");
            static thread_local std::string cached_path;
            static thread_local TabularPomdp cached;
            if (cached_path != hallway2_pomdp) {
                cached = parse_pomdp_file(hallway2_pomdp);
                cached_path = hallway2_pomdp;
            }
            return hallway2_grid_variant(env_seed, cached);
        }
    }
    throw ConfigError("bad domain kind");
}

int reset_prev_action(const GridEnv& env) {
    switch (env.kind) {
        case DomainKind::kMaze: return kMazeStay;
        case DomainKind::kGrasp: return env.n_actions();  // virtual stay
        default: return kGridStay;
    }
}

namespace {
// Rounds the theta image through f32 so that datasets hold exactly what the
// serialized format can represent.
void round_theta_f32(Tensor& theta) {
    for (double& v : theta.vec()) v = static_cast<double>(static_cast<float>(v));
}
}  // namespace

ExpertRollout run_expert_episode(const GridEnv& env, Variant variant, const TaskParams& task,
                                 const TabularPomdp& model, const QTable& q, Rng& rng) {
    ExpertRollout out;
    out.trajectory.task = task;
    const int cap = step_cap(env);
    const int stay = reset_prev_action(env);

    int state = task.start_state;
    Belief belief = model.start_belief();
    int obs = env_reset_observation(env, variant, state, rng);
    try {
        if (stay >= env.n_actions()) {
            belief = bayes_correct(model, belief, 0, obs);
        } else {
            belief = exact_filter_step(model, belief, stay, obs);
        }
    } catch (const DegenerateBeliefError&) {
        out.aborted = true;
        return out;
    }

    int prev_action = stay;
    int prev_obs = obs;
    for (int t = 0; t < cap; ++t) {
        const int a = qmdp_action(q, belief);
        out.trajectory.steps.push_back({static_cast<std::uint8_t>(prev_action),
                                        static_cast<std::uint8_t>(prev_obs),
                                        static_cast<std::uint8_t>(a)});
        StepResult sr = env_step(env, variant, task, state, a, rng);
        out.rewards.push_back(sr.reward);
        state = sr.next_state;
        if (sr.done) {
            out.trajectory.success = true;
            break;
        }
        try {
            belief = exact_filter_step(model, belief, a, sr.observation);
        } catch (const DegenerateBeliefError&) {
            out.aborted = true;  // counts as failure
            break;
        }
        prev_action = a;
        prev_obs = sr.observation;
    }
    return out;
}

Dataset generate_expert_data(const DomainConfig& config, int num_envs, int trajs_per_env,
                             std::uint64_t seed, bool keep_failures, int threads) {
    if (num_envs <= 0 || trajs_per_env <= 0)
        throw ConfigError("generate_expert_data: counts must be positive");

    Dataset ds;
    ds.manifest.kind = config.kind;
    ds.manifest.variant = config.variant;
    ds.manifest.n = config.n;
    ds.manifest.p_obstacle = config.p_obstacle;
    ds.manifest.fixed_env = config.fixed_env;
    ds.manifest.trajs_per_env = trajs_per_env;
    ds.manifest.seed = seed;
    ds.manifest.includes_failures = keep_failures;

    struct EnvResult {
        GridEnv env;
        std::vector<Trajectory> trajs;
        int attempts = 0;
        int successes = 0;
    };
    std::vector<EnvResult> results(static_cast<std::size_t>(num_envs));

    auto work = [&](int i) {
        EnvResult& res = results[static_cast<std::size_t>(i)];
        res.env = config.make_env(i, seed);
        Rng rng(split_seed(seed ^ 0x7261742a31ULL, static_cast<std::uint64_t>(i)));
        for (int j = 0; j < trajs_per_env; ++j) {
            TaskParams task = sample_task(res.env, rng);
            round_theta_f32(task.theta);
            TabularPomdp model = build_ground_truth_pomdp(res.env, config.variant, task);
            ViResult vi = value_iteration(model);
            ExpertRollout roll = run_expert_episode(res.env, config.variant, task, model, vi.q, rng);
            ++res.attempts;
            if (roll.trajectory.success) ++res.successes;
            if (roll.trajectory.success || (keep_failures && !roll.trajectory.steps.empty())) {
                roll.trajectory.env_index = i;
                res.trajs.push_back(std::move(roll.trajectory));
            }
        }
    };

    if (threads <= 1) {
        for (int i = 0; i < num_envs; ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic_int next{0};
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&]() {
                for (int i = next.fetch_add(1); i < num_envs; i = next.fetch_add(1)) work(i);
            });
        for (auto& th : pool) th.join();
    }

    for (EnvResult& res : results) {
        ds.manifest.expert_attempts += res.attempts;
        ds.manifest.expert_successes += res.successes;
        ds.envs.push_back(std::move(res.env));
        for (Trajectory& t : res.trajs) ds.trajectories.push_back(std::move(t));
    }
    ds.manifest.env_count = static_cast<int>(ds.envs.size());
    ds.manifest.traj_count = static_cast<int>(ds.trajectories.size());
    if (!ds.envs.empty()) {
        ds.manifest.theta_channels = 2 + (ds.envs[0].orientations > 1 ? 4 : 1);
        ds.manifest.obs_bits = ds.envs[0].obs_bits();
        ds.manifest.n_actions = ds.envs[0].n_actions();
        ds.manifest.noise_fail = ds.envs[0].noise_fail;
        ds.manifest.noise_obs = ds.envs[0].noise_obs;
    }
    return ds;
}

void split_train_val(Dataset& dataset, double fraction, std::uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0)
        throw std::invalid_argument("split_train_val: fraction must be in (0,1)");
    const int t = static_cast<int>(dataset.trajectories.size());
    int val = static_cast<int>(std::llround(fraction * t));
    val = std::max(val, 1);
    if (t < 2 || val >= t) throw std::invalid_argument("split_train_val: dataset too small");

    std::vector<int> idx(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) idx[static_cast<std::size_t>(i)] = i;
    Rng rng(seed);
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.next_below(i))]);
    dataset.val_idx.assign(idx.begin(), idx.begin() + val);
    dataset.train_idx.assign(idx.begin() + val, idx.end());
}

// ---------------------------------------------------------------------------
// serialization: manifest.json + one QNTD tensor file per array

namespace {
std::vector<float> f32_of(const Tensor& t) {
    std::vector<float> out(static_cast<std::size_t>(t.numel()));
    for (int i = 0; i < t.numel(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(t[i]);
    return out;
}

json manifest_json(const DatasetManifest& m, const Dataset& ds) {
    json j;
    j["format"] = "qmdpnet-dataset";
    j["format_version"] = m.format_version;
    j["domain"] = domain_kind_name(m.kind);
    j["variant"] = variant_name(m.variant);
    j["n"] = m.n;
    j["p_obstacle"] = m.p_obstacle;
    j["fixed_env"] = m.fixed_env;
    j["env_count"] = m.env_count;
    j["traj_count"] = m.traj_count;
    j["trajs_per_env"] = m.trajs_per_env;
    j["seed"] = m.seed;
    j["theta_channels"] = m.theta_channels;
    j["obs_bits"] = m.obs_bits;
    j["n_actions"] = m.n_actions;
    j["includes_failures"] = m.includes_failures;
    j["expert_attempts"] = m.expert_attempts;
    j["expert_successes"] = m.expert_successes;
    j["noise_fail"] = m.noise_fail;
    j["noise_obs"] = m.noise_obs;
    j["channel_schema"] = "c0 obstacles, c1 goal, c2.. initial belief";
    j["train_idx"] = ds.train_idx;
    j["val_idx"] = ds.val_idx;
    return j;
}

void manifest_from_json(const json& j, DatasetManifest& m, Dataset& ds) {
    if (j.value("format", "") != "qmdpnet-dataset")
        throw FormatError("dataset: manifest is not a dataset manifest");
    if (j.at("format_version").get<int>() != m.format_version)
        throw FormatError("dataset: unsupported format version");
    m.kind = domain_kind_from_name(j.at("domain").get<std::string>());
    m.variant = variant_from_name(j.at("variant").get<std::string>());
    m.n = j.at("n").get<int>();
    m.p_obstacle = j.at("p_obstacle").get<double>();
    m.fixed_env = j.at("fixed_env").get<bool>();
    m.env_count = j.at("env_count").get<int>();
    m.traj_count = j.at("traj_count").get<int>();
    m.trajs_per_env = j.at("trajs_per_env").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.theta_channels = j.at("theta_channels").get<int>();
    m.obs_bits = j.at("obs_bits").get<int>();
    m.n_actions = j.at("n_actions").get<int>();
    m.includes_failures = j.at("includes_failures").get<bool>();
    m.expert_attempts = j.at("expert_attempts").get<int>();
    m.expert_successes = j.at("expert_successes").get<int>();
    m.noise_fail = j.at("noise_fail").get<double>();
    m.noise_obs = j.at("noise_obs").get<double>();
    ds.train_idx = j.at("train_idx").get<std::vector<int>>();
    ds.val_idx = j.at("val_idx").get<std::vector<int>>();
}
}  // namespace

void save_dataset(const Dataset& ds, const std::string& directory) {
    fs::create_directories(directory);
    const std::string dir = directory + "/";

    {
        std::ofstream out(dir + "manifest.json", std::ios::binary);
        if (!out) throw FormatError("dataset: cannot write manifest.json");
        out << manifest_json(ds.manifest, ds).dump(2) << "\n";
    }

    const int e = static_cast<int>(ds.envs.size());
    if (e == 0) throw FormatError("dataset: nothing to save");
    const int h = ds.envs[0].height, w = ds.envs[0].width;
    std::vector<std::uint8_t> obstacles;
    std::vector<float> env_meta;  // grasp point / padding per env
    for (const GridEnv& env : ds.envs) {
        obstacles.insert(obstacles.end(), env.obstacle.begin(), env.obstacle.end());
        env_meta.push_back(static_cast<float>(env.grasp_row));
        env_meta.push_back(static_cast<float>(env.grasp_col));
    }
    write_qntd_u8(dir + "env_obstacle.qntd", {e, h, w}, obstacles);
    write_qntd_f32(dir + "env_meta.qntd", {e, 2}, env_meta);

    const int t = static_cast<int>(ds.trajectories.size());
    const int bc = ds.manifest.theta_channels - 2;
    std::vector<float> beliefs, goals, starts, env_idx, offsets;
    std::vector<std::uint8_t> success, prev_a, obs, expert_a;
    offsets.push_back(0.0f);
    for (const Trajectory& tr : ds.trajectories) {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                for (int k = 0; k < bc; ++k)
                    beliefs.push_back(static_cast<float>(tr.task.theta.at(r, c, 2 + k)));
        goals.push_back(static_cast<float>(tr.task.goal_row));
        goals.push_back(static_cast<float>(tr.task.goal_col));
        starts.push_back(static_cast<float>(tr.task.start_state));
        env_idx.push_back(static_cast<float>(tr.env_index));
        success.push_back(tr.success ? 1 : 0);
        for (const TrajStep& st : tr.steps) {
            prev_a.push_back(st.prev_action);
            obs.push_back(st.observation);
            expert_a.push_back(st.expert_action);
        }
        offsets.push_back(static_cast<float>(prev_a.size()));
    }
    if (t > 0) {
        write_qntd_f32(dir + "traj_belief.qntd", {t, h, w, bc}, beliefs);
        write_qntd_f32(dir + "traj_goal.qntd", {t, 2}, goals);
        write_qntd_f32(dir + "traj_start.qntd", {t}, starts);
        write_qntd_f32(dir + "traj_env.qntd", {t}, env_idx);
        write_qntd_u8(dir + "traj_success.qntd", {t}, success);
        write_qntd_f32(dir + "step_offset.qntd", {t + 1}, offsets);
        const int total = static_cast<int>(prev_a.size());
        write_qntd_u8(dir + "step_prev_action.qntd", {total}, prev_a);
        write_qntd_u8(dir + "step_observation.qntd", {total}, obs);
        write_qntd_u8(dir + "step_expert_action.qntd", {total}, expert_a);
    }
}

namespace {
Tensor rebuild_theta(const GridEnv& env, const Trajectory& tr, const std::vector<float>& belief,
                     std::size_t offset, int bc) {
    Tensor theta({env.height, env.width, 2 + bc});
    for (int r = 0; r < env.height; ++r)
        for (int c = 0; c < env.width; ++c) {
            theta.at(r, c, 0) = env.obstacle_at(r, c) ? 1.0 : 0.0;
            for (int k = 0; k < bc; ++k)
                theta.at(r, c, 2 + k) = belief[offset + static_cast<std::size_t>(
                                                             (r * env.width + c) * bc + k)];
        }
    if (env.kind == DomainKind::kGrasp) {
        theta.at(env.grasp_row, env.grasp_col, 1) = 1.0;
    } else {
        theta.at(tr.task.goal_row, tr.task.goal_col, 1) = 1.0;
    }
    return theta;
}
}  // namespace

Dataset load_dataset(const std::string& directory) {
    const std::string dir = directory + "/";
    std::ifstream in(dir + "manifest.json", std::ios::binary);
    if (!in) throw FormatError("dataset: missing manifest.json in " + directory);
    json j = json::parse(in, nullptr, true);

    Dataset ds;
    manifest_from_json(j, ds.manifest, ds);

    QntdTensor obstacles = read_qntd(dir + "env_obstacle.qntd");
    QntdTensor env_meta = read_qntd(dir + "env_meta.qntd");
    if (obstacles.dims.size() != 3 || !obstacles.is_u8)
        throw FormatError("dataset: env_obstacle.qntd has wrong shape or type");
    const int e = obstacles.dims[0], h = obstacles.dims[1], w = obstacles.dims[2];
    if (e != ds.manifest.env_count) throw FormatError("dataset: env count mismatch");
    for (int i = 0; i < e; ++i) {
        GridEnv env;
        env.kind = ds.manifest.kind;
        env.height = h;
        env.width = w;
        env.orientations = env.kind == DomainKind::kMaze ? 4 : 1;
        env.noise_fail = ds.manifest.noise_fail;
        env.noise_obs = ds.manifest.noise_obs;
        env.obstacle.assign(
            obstacles.u8.begin() + static_cast<std::ptrdiff_t>(i) * h * w,
            obstacles.u8.begin() + static_cast<std::ptrdiff_t>(i + 1) * h * w);
        env.grasp_row = static_cast<int>(env_meta.f32[static_cast<std::size_t>(2 * i)]);
        env.grasp_col = static_cast<int>(env_meta.f32[static_cast<std::size_t>(2 * i + 1)]);
        if (env.kind == DomainKind::kGrasp) env.object = env.obstacle;
        ds.envs.push_back(std::move(env));
    }

    const int t = ds.manifest.traj_count;
    if (t > 0) {
        QntdTensor belief = read_qntd(dir + "traj_belief.qntd");
        QntdTensor goal = read_qntd(dir + "traj_goal.qntd");
        QntdTensor start = read_qntd(dir + "traj_start.qntd");
        QntdTensor env_ix = read_qntd(dir + "traj_env.qntd");
        QntdTensor success = read_qntd(dir + "traj_success.qntd");
        QntdTensor offset = read_qntd(dir + "step_offset.qntd");
        QntdTensor pa = read_qntd(dir + "step_prev_action.qntd");
        QntdTensor ob = read_qntd(dir + "step_observation.qntd");
        QntdTensor ea = read_qntd(dir + "step_expert_action.qntd");
        const int bc = ds.manifest.theta_channels - 2;
        if (belief.dims != std::vector<int>{t, h, w, bc})
            throw FormatError("dataset: traj_belief.qntd shape disagrees with manifest");
        if (static_cast<int>(offset.f32.size()) != t + 1)
            throw FormatError("dataset: step_offset.qntd shape disagrees with manifest");
        for (int i = 0; i < t; ++i) {
            Trajectory tr;
            tr.env_index = static_cast<int>(env_ix.f32[static_cast<std::size_t>(i)]);
            tr.success = success.u8[static_cast<std::size_t>(i)] != 0;
            tr.task.start_state = static_cast<int>(start.f32[static_cast<std::size_t>(i)]);
            tr.task.goal_row = static_cast<int>(goal.f32[static_cast<std::size_t>(2 * i)]);
            tr.task.goal_col = static_cast<int>(goal.f32[static_cast<std::size_t>(2 * i + 1)]);
            if (tr.env_index < 0 || tr.env_index >= e)
                throw FormatError("dataset: trajectory references a missing environment");
            tr.task.theta = rebuild_theta(ds.envs[static_cast<std::size_t>(tr.env_index)], tr,
                                          belief.f32,
                                          static_cast<std::size_t>(i) * h * w * bc, bc);
            const auto lo = static_cast<std::size_t>(offset.f32[static_cast<std::size_t>(i)]);
            const auto hi = static_cast<std::size_t>(offset.f32[static_cast<std::size_t>(i + 1)]);
            if (hi < lo || hi > pa.u8.size())
                throw FormatError("dataset: step offsets out of range");
            for (std::size_t k = lo; k < hi; ++k)
                tr.steps.push_back({pa.u8[k], ob.u8[k], ea.u8[k]});
            ds.trajectories.push_back(std::move(tr));
        }
    }
    return ds;
}

bool dataset_deep_equal(const Dataset& a, const Dataset& b) {
    if (a.envs.size() != b.envs.size() || a.trajectories.size() != b.trajectories.size())
        return false;
    if (a.train_idx != b.train_idx || a.val_idx != b.val_idx) return false;
    for (std::size_t i = 0; i < a.envs.size(); ++i) {
        if (a.envs[i].obstacle != b.envs[i].obstacle) return false;
        if (a.envs[i].grasp_row != b.envs[i].grasp_row) return false;
        if (a.envs[i].grasp_col != b.envs[i].grasp_col) return false;
    }
    for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
        const Trajectory& x = a.trajectories[i];
        const Trajectory& y = b.trajectories[i];
        if (x.env_index != y.env_index || x.success != y.success) return false;
        if (x.task.start_state != y.task.start_state) return false;
        if (x.task.goal_row != y.task.goal_row || x.task.goal_col != y.task.goal_col)
            return false;
        if (x.task.theta.vec() != y.task.theta.vec()) return false;
        if (x.steps.size() != y.steps.size()) return false;
        for (std::size_t k = 0; k < x.steps.size(); ++k) {
            if (x.steps[k].prev_action != y.steps[k].prev_action ||
                x.steps[k].observation != y.steps[k].observation ||
                x.steps[k].expert_action != y.steps[k].expert_action)
                return false;
        }
    }
    return true;
}

std::uint64_t dataset_checksum(const Dataset& d) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const GridEnv& env : d.envs) h = fnv1a(env.obstacle.data(), env.obstacle.size(), h);
    for (const Trajectory& t : d.trajectories) {
        h = fnv1a(&t.task.start_state, sizeof(int), h);
        h = fnv1a(&t.task.goal_row, sizeof(int), h);
        h = fnv1a(&t.task.goal_col, sizeof(int), h);
        h = fnv1a(t.task.theta.data(), t.task.theta.vec().size() * sizeof(double), h);
        for (const TrajStep& s : t.steps) h = fnv1a(&s, 3, h);
    }
    return h;
}

}  // namespace qmdpnet
