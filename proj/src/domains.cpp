#include "qmdpnet/domains.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>

#include "qmdpnet/errors.hpp"

namespace qmdpnet {

namespace {
constexpr double kStepReward = -0.1;
constexpr double kBumpReward = -10.0;
constexpr double kGoalReward = 20.0;
constexpr double kDefaultPFail = 0.2;
constexpr double kDefaultPObs = 0.1;
// Reference discount for the ground-truth models. Values far from the goal
// flatten to the same constant under this setting, so belief-weighted
// argmax keeps moving instead of freezing on the stay action; the published
// maze baseline rates are only reproduced in this regime.
constexpr double kReferenceDiscount = 0.9;
}  // namespace

std::string domain_kind_name(DomainKind k) {
    switch (k) {
        case DomainKind::kGrid: return "grid";
        case DomainKind::kMaze: return "maze";
        case DomainKind::kGrasp: return "grasp";
        case DomainKind::kHallway2Grid: return "hallway2grid";
    }
    return "?";
}

std::string variant_name(Variant v) {
    return v == Variant::kDeterministic ? "det" : "stoch";
}

DomainKind domain_kind_from_name(const std::string& s) {
    if (s == "grid") return DomainKind::kGrid;
    if (s == "maze") return DomainKind::kMaze;
    if (s == "grasp") return DomainKind::kGrasp;
    if (s == "hallway2grid") return DomainKind::kHallway2Grid;
    throw ConfigError("unknown domain kind: " + s);
}

Variant variant_from_name(const std::string& s) {
    if (s == "det" || s == "deterministic") return Variant::kDeterministic;
    if (s == "stoch" || s == "stochastic") return Variant::kStochastic;
    throw ConfigError("unknown variant: " + s);
}

int GridEnv::n_free() const {
    int n = 0;
    for (auto v : obstacle) n += v == 0 ? 1 : 0;
    return n;
}

std::vector<int> GridEnv::free_cells() const {
    std::vector<int> out;
    for (int c = 0; c < n_cells(); ++c)
        if (!obstacle[static_cast<std::size_t>(c)]) out.push_back(c);
    return out;
}

int GridEnv::n_actions() const {
    switch (kind) {
        case DomainKind::kGrid:
        case DomainKind::kHallway2Grid: return 5;
        case DomainKind::kMaze: return 4;
        case DomainKind::kGrasp: return 4;
    }
    return 0;
}

int GridEnv::n_states() const { return n_cells() * orientations; }

int GridEnv::obs_bits() const { return kind == DomainKind::kGrasp ? 6 : 4; }

// ---------------------------------------------------------------------------
// generators

GridEnv gen_grid_env(int n, double p_obstacle, std::uint64_t seed) {
    if (n < 4) throw std::invalid_argument("gen_grid_env: n must be >= 4");
    if (p_obstacle < 0.0 || p_obstacle >= 1.0)
        throw std::invalid_argument("gen_grid_env: p must be in [0,1)");
    for (int attempt = 0; attempt < 100; ++attempt) {
        Rng rng(split_seed(seed, static_cast<std::uint64_t>(attempt)));
        GridEnv env;
        env.kind = DomainKind::kGrid;
        env.height = env.width = n;
        env.obstacle.assign(static_cast<std::size_t>(n) * n, 0);
        for (auto& v : env.obstacle) v = rng.next_bool(p_obstacle) ? 1 : 0;
        // reject boards without a reachable pair of free cells
        auto free = env.free_cells();
        if (free.size() < 2) continue;
        std::vector<int> dist(static_cast<std::size_t>(env.n_cells()), -1);
        std::deque<int> q{free[0]};
        dist[static_cast<std::size_t>(free[0])] = 0;
        int seen = 1;
        while (!q.empty()) {
            int c = q.front();
            q.pop_front();
            int r = c / n, col = c % n;
            for (int d = 0; d < 4; ++d) {
                int nr = r + kDirRow[d], nc = col + kDirCol[d];
                if (!env.in_bounds(nr, nc) || env.obstacle_at(nr, nc)) continue;
                int cc = env.cell(nr, nc);
                if (dist[static_cast<std::size_t>(cc)] >= 0) continue;
                dist[static_cast<std::size_t>(cc)] = 1;
                ++seen;
                q.push_back(cc);
            }
        }
        if (seen >= 2) return env;
    }
    throw std::runtime_error("gen_grid_env: no usable board after bounded retries");
}

GridEnv gen_maze_env(int n, std::uint64_t seed) {
    if (n < 5 || n % 2 == 0) throw std::invalid_argument("gen_maze_env: n must be odd and >= 5");
    const int m = (n - 1) / 2;  // passage nodes per side, at odd coordinates
    GridEnv env;
    env.kind = DomainKind::kMaze;
    env.orientations = 4;
    env.height = env.width = n;
    env.obstacle.assign(static_cast<std::size_t>(n) * n, 1);

    auto node_cell = [&](int i, int j) { return env.cell(2 * i + 1, 2 * j + 1); };
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) env.obstacle[static_cast<std::size_t>(node_cell(i, j))] = 0;

    struct Edge {
        int ai, aj, bi, bj;
    };
    std::vector<Edge> edges;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            if (i + 1 < m) edges.push_back({i, j, i + 1, j});
            if (j + 1 < m) edges.push_back({i, j, i, j + 1});
        }
    Rng rng(seed);
    for (std::size_t i = edges.size(); i > 1; --i)
        std::swap(edges[i - 1], edges[static_cast<std::size_t>(rng.next_below(i))]);

    std::vector<int> parent(static_cast<std::size_t>(m * m));
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
    std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    for (const Edge& e : edges) {
        int a = find(e.ai * m + e.aj), b = find(e.bi * m + e.bj);
        if (a == b) continue;
        parent[static_cast<std::size_t>(a)] = b;
        env.obstacle[static_cast<std::size_t>(env.cell(e.ai + e.bi + 1, e.aj + e.bj + 1))] = 0;
    }
    return env;
}

namespace {
// Skyline object shape: column heights over a width, deterministic per id.
struct GraspObject {
    int width = 0;
    std::vector<int> heights;
    int grasp_col = -1;  // strictly protruding column
};

GraspObject grasp_object_shape(int object_id) {
    if (object_id < 0 || object_id >= kGraspObjectCount)
        throw std::invalid_argument("gen_grasp_env: object_id out of range");
    if (object_id == 0) return {1, {1}, 0};  // the unit object
    Rng rng(0x67726173700000ULL + static_cast<std::uint64_t>(object_id));
    for (;;) {
        GraspObject obj;
        obj.width = 1 + rng.next_int(6);
        obj.heights.resize(static_cast<std::size_t>(obj.width));
        for (int& h : obj.heights) h = 1 + rng.next_int(6);
        for (int c = 0; c < obj.width; ++c) {
            int h = obj.heights[static_cast<std::size_t>(c)];
            int left = c > 0 ? obj.heights[static_cast<std::size_t>(c - 1)] : 0;
            int right = c + 1 < obj.width ? obj.heights[static_cast<std::size_t>(c + 1)] : 0;
            if (h > left && h > right) {
                obj.grasp_col = c;
                break;
            }
        }
        if (obj.grasp_col >= 0) return obj;
    }
}
}  // namespace

GridEnv gen_grasp_env(int object_id, std::uint64_t seed) {
    GraspObject obj = grasp_object_shape(object_id);
    const int n = kGraspWorkspace;
    GridEnv env;
    env.kind = DomainKind::kGrasp;
    env.height = env.width = n;
    env.obstacle.assign(static_cast<std::size_t>(n) * n, 0);
    env.object.assign(static_cast<std::size_t>(n) * n, 0);

    // placement on the bottom row; the grasp column must stay clear of the
    // side walls so the goal anchor is reachable
    Rng rng(seed);
    int lo = std::max(0, 1 - obj.grasp_col);
    int hi = std::min(n - obj.width, 12 - obj.grasp_col);
    if (hi < lo) throw std::runtime_error("gen_grasp_env: object cannot be placed");
    int col0 = lo + rng.next_int(hi - lo + 1);
    for (int c = 0; c < obj.width; ++c)
        for (int r = 0; r < obj.heights[static_cast<std::size_t>(c)]; ++r) {
            env.object[static_cast<std::size_t>(env.cell(r, col0 + c))] = 1;
            env.obstacle[static_cast<std::size_t>(env.cell(r, col0 + c))] = 1;
        }
    env.grasp_row = obj.heights[static_cast<std::size_t>(obj.grasp_col)];  // cell above the top
    env.grasp_col = col0 + obj.grasp_col;
    return env;
}

// ---------------------------------------------------------------------------
// grasp gripper geometry: width-3 "U" opening downward, palm centered on the
// anchor, fingers two cells long. Sensors probe, per finger left-to-right,
// the outer cell at tip level, the cell under the tip, and the inner cavity
// cell at tip level (shared between the fingers by construction).

namespace {
constexpr int kGripperCells[7][2] = {
    {0, -1}, {0, 0}, {0, 1},    // palm
    {-1, -1}, {-2, -1},         // left finger
    {-1, 1},  {-2, 1},          // right finger
};
constexpr int kGraspSensors[6][2] = {
    {-2, -2}, {-3, -1}, {-2, 0},  // left finger: outer, below tip, inner
    {-2, 0},  {-3, 1},  {-2, 2},  // right finger: inner, below tip, outer
};

bool grasp_anchor_ok(const GridEnv& env, int r, int c) {
    for (const auto& g : kGripperCells) {
        int rr = r + g[0], cc = c + g[1];
        if (!env.in_bounds(rr, cc)) return false;
        if (env.object_at(rr, cc)) return false;
    }
    return true;
}

int grasp_goal_anchor_row(const GridEnv& env) { return env.grasp_row + 1; }
}  // namespace

int true_observation_pattern(const GridEnv& env, int state) {
    switch (env.kind) {
        case DomainKind::kGrid:
        case DomainKind::kHallway2Grid: {
            int r = state / env.width, c = state % env.width;
            int pattern = 0;
            for (int d = 0; d < 4; ++d)
                if (env.obstacle_at(r + kDirRow[d], c + kDirCol[d])) pattern |= 1 << d;
            return pattern;
        }
        case DomainKind::kMaze: {
            int cell = state / 4, heading = state % 4;
            int r = cell / env.width, c = cell % env.width;
            int pattern = 0;
            for (int i = 0; i < 4; ++i) {  // front, right, back, left
                int d = (heading + i) % 4;
                if (env.obstacle_at(r + kDirRow[d], c + kDirCol[d])) pattern |= 1 << i;
            }
            return pattern;
        }
        case DomainKind::kGrasp: {
            int r = state / env.width, c = state % env.width;
            int pattern = 0;
            for (int i = 0; i < 6; ++i) {
                int rr = r + kGraspSensors[i][0], cc = c + kGraspSensors[i][1];
                bool contact = !env.in_bounds(rr, cc) || env.object_at(rr, cc);
                if (contact) pattern |= 1 << i;
            }
            return pattern;
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// transition law (single source of truth for the model builder and env_step)

namespace {
struct Outcome {
    int next;
    double p;
    double reward;
};

double env_p_fail(const GridEnv& env, Variant variant) {
    if (variant == Variant::kDeterministic) return 0.0;
    return env.noise_fail >= 0.0 ? env.noise_fail : kDefaultPFail;
}

double env_p_obs(const GridEnv& env, Variant variant) {
    if (variant == Variant::kDeterministic) return 0.0;
    return env.noise_obs >= 0.0 ? env.noise_obs : kDefaultPObs;
}

bool state_is_goal(const GridEnv& env, const TaskParams& task, int state) {
    const int cell = env.orientations > 1 ? state / env.orientations : state;
    return cell / env.width == task.goal_row && cell % env.width == task.goal_col;
}

// Outcomes of (state, action) in the physical blocked-at-obstacles model.
std::vector<Outcome> transition_outcomes(const GridEnv& env, Variant variant,
                                         const TaskParams& task, int state, int action) {
    const double p_fail = env_p_fail(env, variant);
    if (state_is_goal(env, task, state)) return {{state, 1.0, 0.0}};

    auto move_outcomes = [&](int next, double move_reward) -> std::vector<Outcome> {
        if (p_fail == 0.0) return {{next, 1.0, move_reward}};
        return {{next, 1.0 - p_fail, move_reward}, {state, p_fail, kStepReward}};
    };

    switch (env.kind) {
        case DomainKind::kGrid:
        case DomainKind::kHallway2Grid: {
            int r = state / env.width, c = state % env.width;
            if (env.obstacle_at(r, c)) return {{state, 1.0, 0.0}};  // unreachable filler
            if (action == kGridStay) return {{state, 1.0, kStepReward}};
            int nr = r + kDirRow[action], nc = c + kDirCol[action];
            if (env.obstacle_at(nr, nc)) return {{state, 1.0, kBumpReward}};
            int next = env.cell(nr, nc);
            double rwd = state_is_goal(env, task, next) ? kGoalReward : kStepReward;
            return move_outcomes(next, rwd);
        }
        case DomainKind::kMaze: {
            int cell = state / 4, heading = state % 4;
            int r = cell / env.width, c = cell % env.width;
            if (env.obstacle_at(r, c)) return {{state, 1.0, 0.0}};
            if (action == kMazeStay) return {{state, 1.0, kStepReward}};
            if (action == kMazeForward) {
                int nr = r + kDirRow[heading], nc = c + kDirCol[heading];
                if (env.obstacle_at(nr, nc)) return {{state, 1.0, kBumpReward}};
                int next = env.cell(nr, nc) * 4 + heading;
                double rwd = state_is_goal(env, task, next) ? kGoalReward : kStepReward;
                return move_outcomes(next, rwd);
            }
            int nh = action == kMazeTurnLeft ? (heading + 3) % 4 : (heading + 1) % 4;
            return move_outcomes(cell * 4 + nh, kStepReward);
        }
        case DomainKind::kGrasp: {
            int r = state / env.width, c = state % env.width;
            if (!grasp_anchor_ok(env, r, c)) return {{state, 1.0, 0.0}};
            int nr = r + kDirRow[action], nc = c + kDirCol[action];
            if (!grasp_anchor_ok(env, nr, nc)) return {{state, 1.0, 0.0}};  // contact blocks
            int next = env.cell(nr, nc);
            double rwd = state_is_goal(env, task, next) ? 1.0 : 0.0;
            if (p_fail == 0.0) return {{next, 1.0, rwd}};
            return {{next, 1.0 - p_fail, rwd}, {state, p_fail, 0.0}};
        }
    }
    return {{state, 1.0, 0.0}};
}

// Z row over the task-observation alphabet for a landed state.
void fill_obs_row(const GridEnv& env, Variant variant, int state, double* row, int n_obs) {
    const double p_err = env_p_obs(env, variant);
    const int bits = env.obs_bits();
    const int truth = true_observation_pattern(env, state);
    for (int o = 0; o < n_obs; ++o) {
        double p = 1.0;
        for (int i = 0; i < bits; ++i) {
            bool match = ((o >> i) & 1) == ((truth >> i) & 1);
            p *= match ? 1.0 - p_err : p_err;
        }
        row[o] = p;
    }
}
}  // namespace

bool is_goal_state(const GridEnv& env, const TaskParams& task, int state) {
    return state_is_goal(env, task, state);
}

int step_cap(const GridEnv& env) {
    switch (env.kind) {
        case DomainKind::kHallway2Grid: return kHallway2StepCap;
        case DomainKind::kGrasp: return 10 * kGraspWorkspace;
        default: return 10 * std::max(env.height, env.width);
    }
}

TabularPomdp build_ground_truth_pomdp(const GridEnv& env, Variant variant,
                                      const TaskParams& task) {
    const int ns = env.n_states();
    const int na = env.n_actions();
    const int no = env.n_task_obs();
    TabularPomdp m(ns, na, no);
    m.gamma = kReferenceDiscount;

    for (int s = 0; s < ns; ++s) {
        const bool goal = state_is_goal(env, task, s);
        m.terminal[static_cast<std::size_t>(s)] = goal ? 1 : 0;
        for (int a = 0; a < na; ++a) {
            double racc = 0.0;
            for (const Outcome& o : transition_outcomes(env, variant, task, s, a)) {
                m.add_t(a, s, o.next, o.p);
                racc += o.p * o.reward;
            }
            m.r(s, a) = goal ? 0.0 : racc;
        }
    }
    std::vector<double> zrow(static_cast<std::size_t>(no));
    for (int s2 = 0; s2 < ns; ++s2) {
        fill_obs_row(env, variant, s2, zrow.data(), no);
        for (int a = 0; a < na; ++a)
            for (int o = 0; o < no; ++o) m.z(a, s2, o) = zrow[static_cast<std::size_t>(o)];
    }
    if (task.start_state >= 0) {
        m.start.assign(static_cast<std::size_t>(ns), 0.0);
        const Tensor& th = task.theta;
        const int bc = task.belief_channels();
        for (int r = 0; r < env.height; ++r)
            for (int c = 0; c < env.width; ++c)
                for (int k = 0; k < bc; ++k)
                    m.start[static_cast<std::size_t>(env.cell(r, c) * bc + k)] =
                        th.at(r, c, 2 + k);
        double total = 0.0;
        for (double p : m.start) total += p;
        for (double& p : m.start) p /= total;
    }
    m.finalize();
    return m;
}

TabularPomdp build_shift_invariant_pomdp(const GridEnv& env, Variant variant,
                                         const TaskParams& task) {
    if (env.kind != DomainKind::kGrid && env.kind != DomainKind::kHallway2Grid)
        throw std::invalid_argument("build_shift_invariant_pomdp: grid domains only");
    const int cells = env.n_cells();
    const int ns = cells + 1;  // trailing void state
    const int void_s = cells;
    const double p_fail = env_p_fail(env, variant);
    const double p_err = env_p_obs(env, variant);

    TabularPomdp m(ns, 5, kNavModelObs);
    m.gamma = kReferenceDiscount;
    for (int s = 0; s < cells; ++s) {
        int r = s / env.width, c = s % env.width;
        // state-based reward keeps the value map peaked at the goal
        const double rwd = state_is_goal(env, task, s) ? kGoalReward : kStepReward;
        for (int a = 0; a < 5; ++a) {
            m.r(s, a) = rwd;
            if (a == kGridStay) {
                m.add_t(a, s, s, 1.0);
                continue;
            }
            int nr = r + kDirRow[a], nc = c + kDirCol[a];
            int next = env.in_bounds(nr, nc) ? env.cell(nr, nc) : void_s;
            if (p_fail == 0.0) {
                m.add_t(a, s, next, 1.0);
            } else {
                m.add_t(a, s, next, 1.0 - p_fail);
                m.add_t(a, s, s, p_fail);
            }
        }
    }
    for (int a = 0; a < 5; ++a) m.add_t(a, void_s, void_s, 1.0);

    for (int s2 = 0; s2 < cells; ++s2) {
        const int truth = true_observation_pattern(env, s2);
        for (int o = 0; o < 16; ++o) {
            double p = 1.0;
            for (int i = 0; i < 4; ++i) {
                bool match = ((o >> i) & 1) == ((truth >> i) & 1);
                p *= match ? 1.0 - p_err : p_err;
            }
            for (int a = 0; a < 5; ++a) m.z(a, s2, o) = p;
        }
    }
    for (int a = 0; a < 5; ++a) m.z(a, void_s, kNavModelObs - 1) = 1.0;

    if (task.start_state >= 0) {
        m.start.assign(static_cast<std::size_t>(ns), 0.0);
        for (int r = 0; r < env.height; ++r)
            for (int c = 0; c < env.width; ++c)
                m.start[static_cast<std::size_t>(env.cell(r, c))] = task.theta.at(r, c, 2);
        double total = 0.0;
        for (double p : m.start) total += p;
        for (double& p : m.start) p /= total;
    }
    m.finalize();
    return m;
}

StepResult env_step(const GridEnv& env, Variant variant, const TaskParams& task, int state,
                    int action, Rng& rng) {
    if (action < 0 || action >= env.n_actions())
        throw std::invalid_argument("env_step: invalid action");
    auto outcomes = transition_outcomes(env, variant, task, state, action);
    double u = rng.next_double();
    double acc = 0.0;
    const Outcome* chosen = &outcomes.back();
    for (const Outcome& o : outcomes) {
        acc += o.p;
        if (u < acc) {
            chosen = &o;
            break;
        }
    }
    StepResult res;
    res.next_state = chosen->next;
    res.reward = chosen->reward;
    res.done = state_is_goal(env, task, chosen->next);

    // observation for the landed state
    const double p_err = env_p_obs(env, variant);
    int truth = true_observation_pattern(env, res.next_state);
    int obs = 0;
    for (int i = 0; i < env.obs_bits(); ++i) {
        int bit = (truth >> i) & 1;
        if (p_err > 0.0 && rng.next_bool(p_err)) bit ^= 1;
        obs |= bit << i;
    }
    res.observation = obs;
    return res;
}

int env_reset_observation(const GridEnv& env, Variant variant, int state, Rng& rng) {
    const double p_err = env_p_obs(env, variant);
    int truth = true_observation_pattern(env, state);
    int obs = 0;
    for (int i = 0; i < env.obs_bits(); ++i) {
        int bit = (truth >> i) & 1;
        if (p_err > 0.0 && rng.next_bool(p_err)) bit ^= 1;
        obs |= bit << i;
    }
    return obs;
}

// ---------------------------------------------------------------------------
// task sampling

std::vector<int> motion_distances_to_goal(const GridEnv& env, int goal_row, int goal_col) {
    TaskParams t;
    t.goal_row = goal_row;
    t.goal_col = goal_col;
    return motion_distances_to_goal(env, t);
}

std::vector<int> motion_distances_to_goal(const GridEnv& env, const TaskParams& task) {
    const int ns = env.n_states();
    std::vector<int> dist(static_cast<std::size_t>(ns), -1);
    std::deque<int> q;
    auto push_goal = [&](int s) {
        dist[static_cast<std::size_t>(s)] = 0;
        q.push_back(s);
    };
    const int goal_cell = task.goal_row * env.width + task.goal_col;
    if (env.orientations > 1) {
        for (int h = 0; h < 4; ++h) push_goal(goal_cell * 4 + h);
    } else {
        push_goal(goal_cell);
    }

    // expand over reversed deterministic motion edges
    while (!q.empty()) {
        int s = q.front();
        q.pop_front();
        int d = dist[static_cast<std::size_t>(s)];
        std::vector<int> preds;
        switch (env.kind) {
            case DomainKind::kGrid:
            case DomainKind::kHallway2Grid: {
                int r = s / env.width, c = s % env.width;
                for (int a = 0; a < 4; ++a) {
                    int pr = r - kDirRow[a], pc = c - kDirCol[a];
                    if (!env.obstacle_at(pr, pc)) preds.push_back(env.cell(pr, pc));
                }
                break;
            }
            case DomainKind::kMaze: {
                int cell = s / 4, heading = s % 4;
                int r = cell / env.width, c = cell % env.width;
                int pr = r - kDirRow[heading], pc = c - kDirCol[heading];
                if (!env.obstacle_at(pr, pc)) preds.push_back(env.cell(pr, pc) * 4 + heading);
                preds.push_back(cell * 4 + (heading + 1) % 4);  // undo turn-left
                preds.push_back(cell * 4 + (heading + 3) % 4);  // undo turn-right
                break;
            }
            case DomainKind::kGrasp: {
                int r = s / env.width, c = s % env.width;
                if (!grasp_anchor_ok(env, r, c)) break;
                for (int a = 0; a < 4; ++a) {
                    int pr = r - kDirRow[a], pc = c - kDirCol[a];
                    if (grasp_anchor_ok(env, pr, pc)) preds.push_back(env.cell(pr, pc));
                }
                break;
            }
        }
        for (int p : preds) {
            if (dist[static_cast<std::size_t>(p)] >= 0) continue;
            dist[static_cast<std::size_t>(p)] = d + 1;
            q.push_back(p);
        }
    }
    return dist;
}

namespace {
// Candidate start states and belief-support universe for a domain.
std::vector<int> support_universe(const GridEnv& env) {
    std::vector<int> out;
    switch (env.kind) {
        case DomainKind::kGrid:
        case DomainKind::kHallway2Grid:
            return env.free_cells();
        case DomainKind::kMaze: {
            for (int c : env.free_cells())
                for (int h = 0; h < 4; ++h) out.push_back(c * 4 + h);
            return out;
        }
        case DomainKind::kGrasp: {
            for (int r = env.height / 2; r < env.height; ++r)
                for (int c = 0; c < env.width; ++c)
                    if (grasp_anchor_ok(env, r, c)) out.push_back(env.cell(r, c));
            return out;
        }
    }
    return out;
}
}  // namespace

TaskParams sample_task(const GridEnv& env, Rng& rng, int forced_support_size) {
    const std::vector<int> universe = support_universe(env);
    if (universe.size() < 2) throw std::runtime_error("sample_task: too few candidate states");

    const bool grasp = env.kind == DomainKind::kGrasp;
    const std::vector<int> free = env.free_cells();

    TaskParams task;
    for (int attempt = 0;; ++attempt) {
        if (attempt >= 200) throw std::runtime_error("sample_task: no feasible start-goal pair");
        int start = universe[static_cast<std::size_t>(rng.next_int(
            static_cast<int>(universe.size())))];
        int goal_cell;
        if (grasp) {
            goal_cell = env.cell(grasp_goal_anchor_row(env), env.grasp_col);
        } else {
            goal_cell = free[static_cast<std::size_t>(rng.next_int(static_cast<int>(free.size())))];
        }
        int start_cell = env.orientations > 1 ? start / 4 : start;
        if (start_cell == goal_cell) continue;
        task.goal_row = goal_cell / env.width;
        task.goal_col = goal_cell % env.width;
        task.start_state = start;
        auto dist = motion_distances_to_goal(env, task);
        if (dist[static_cast<std::size_t>(start)] > 0) break;
    }

    // support size drawn from {1, 2, ..., Nf/2, Nf}
    const int nf = static_cast<int>(universe.size());
    int support_size = forced_support_size;
    if (support_size <= 0) {
        std::vector<int> sizes;
        for (int k = 1; k <= nf / 2; ++k) sizes.push_back(k);
        sizes.push_back(nf);
        support_size = sizes[static_cast<std::size_t>(rng.next_int(static_cast<int>(sizes.size())))];
    }
    support_size = std::min(support_size, nf);

    // support contains the true start; the rest uniform without replacement
    std::vector<int> rest;
    rest.reserve(universe.size() - 1);
    for (int s : universe)
        if (s != task.start_state) rest.push_back(s);
    std::vector<int> support{task.start_state};
    for (int idx : rng.sample_without_replacement(static_cast<int>(rest.size()), support_size - 1))
        support.push_back(rest[static_cast<std::size_t>(idx)]);

    const int bc = env.orientations > 1 ? 4 : 1;
    task.theta = Tensor({env.height, env.width, 2 + bc});
    for (int r = 0; r < env.height; ++r)
        for (int c = 0; c < env.width; ++c)
            task.theta.at(r, c, 0) = env.obstacle_at(r, c) ? 1.0 : 0.0;
    if (grasp) {
        task.theta.at(env.grasp_row, env.grasp_col, 1) = 1.0;
    } else {
        task.theta.at(task.goal_row, task.goal_col, 1) = 1.0;
    }
    const double mass = 1.0 / support_size;
    for (int s : support) {
        int cell = env.orientations > 1 ? s / 4 : s;
        int h = env.orientations > 1 ? s % 4 : 0;
        task.theta.at(cell / env.width, cell % env.width, 2 + h) += mass;
    }
    return task;
}

// ---------------------------------------------------------------------------
// occupancy maps

GridEnv load_occupancy_map(const PgmImage& img, int target_h, int target_w, int threshold) {
    if (target_h <= 0 || target_w <= 0)
        throw std::invalid_argument("load_occupancy_map: target dims must be positive");
    GridEnv env;
    env.kind = DomainKind::kGrid;
    env.height = target_h;
    env.width = target_w;
    env.obstacle.assign(static_cast<std::size_t>(target_h) * target_w, 0);

    const double sr = static_cast<double>(img.height) / target_h;
    const double sc = static_cast<double>(img.width) / target_w;
    for (int r = 0; r < target_h; ++r) {
        const double r0 = r * sr, r1 = (r + 1) * sr;
        for (int c = 0; c < target_w; ++c) {
            const double c0 = c * sc, c1 = (c + 1) * sc;
            double acc = 0.0, area = 0.0;
            for (int ir = static_cast<int>(r0); ir < img.height && ir < r1; ++ir) {
                const double rh = std::min<double>(r1, ir + 1) - std::max<double>(r0, ir);
                if (rh <= 0.0) continue;
                for (int ic = static_cast<int>(c0); ic < img.width && ic < c1; ++ic) {
                    const double cw = std::min<double>(c1, ic + 1) - std::max<double>(c0, ic);
                    if (cw <= 0.0) continue;
                    acc += rh * cw * img.at(ir, ic);
                    area += rh * cw;
                }
            }
            const double mean = area > 0.0 ? acc / area : 0.0;
            if (mean < threshold) env.obstacle[static_cast<std::size_t>(env.cell(r, c))] = 1;
        }
    }
    return env;
}

GridEnv load_occupancy_map_bytes(const std::vector<std::uint8_t>& pgm_bytes, int target_h,
                                 int target_w, int threshold) {
    return load_occupancy_map(parse_pgm(pgm_bytes), target_h, target_w, threshold);
}

const std::vector<MapPreset>& map_presets() {
    static const std::vector<MapPreset> presets = {
        {"intel", 100, 101, "maps/intel.pgm"},
        {"freiburg", 139, 57, "maps/freiburg.pgm"},
        {"belgioioso", 151, 35, "maps/belgioioso.pgm"},
        {"mit", 41, 83, "maps/mit.pgm"},
    };
    return presets;
}

GridEnv load_preset_map(const std::string& name, const std::string& data_dir, int threshold) {
    for (const MapPreset& p : map_presets()) {
        if (p.name == name) {
            GridEnv env = load_occupancy_map(read_pgm(data_dir + "/" + p.file), p.height, p.width,
                                             threshold);
            return env;
        }
    }
    throw ConfigError("unknown map preset: " + name);
}

// ---------------------------------------------------------------------------
// hallway2 reconstruction and grid variant

TabularPomdp hallway2_reconstruction() {
    // 23-room floor plan, identical to hallway2_eval_layout
    static const char* rows[5] = {
        ".......",
        "##.####",
        ".......",
        "####.##",
        ".......",
    };
    const int plan_h = 5, plan_w = 7;
    std::vector<int> room_of(static_cast<std::size_t>(plan_h * plan_w), -1);
    std::vector<std::pair<int, int>> rooms;
    for (int r = 0; r < plan_h; ++r)
        for (int c = 0; c < plan_w; ++c)
            if (rows[r][c] == '.') {
                room_of[static_cast<std::size_t>(r * plan_w + c)] = static_cast<int>(rooms.size());
                rooms.emplace_back(r, c);
            }
    const int n_rooms = static_cast<int>(rooms.size());  // 23
    const int goal_room = room_of[static_cast<std::size_t>(2 * plan_w + 5)];  // middle corridor

    auto wall_at = [&](int r, int c) {
        if (r < 0 || r >= plan_h || c < 0 || c >= plan_w) return true;
        return rows[r][c] == '#';
    };

    const int ns = n_rooms * 4;
    const int na = 5;  // forward, turn-left, turn-right, turn-around, stay
    const int no = 17;
    const double p_fail = 0.2;
    const double p_obs = 0.1;
    TabularPomdp m(ns, na, no);
    m.gamma = 0.95;

    auto state_of = [&](int room, int heading) { return room * 4 + heading; };
    for (int room = 0; room < n_rooms; ++room) {
        const bool goal = room == goal_room;
        auto [r, c] = rooms[static_cast<std::size_t>(room)];
        for (int h = 0; h < 4; ++h) {
            const int s = state_of(room, h);
            if (goal) {
                m.terminal[static_cast<std::size_t>(s)] = 1;
                for (int a = 0; a < na; ++a) m.add_t(a, s, s, 1.0);
                continue;
            }
            // noisy actuation: the intended effect succeeds with 0.8 and the
            // remaining mass lands on corrupted headings or a no-op, so
            // orientation uncertainty keeps accumulating
            auto turned = [&](int dh) { return state_of(room, (h + dh) % 4); };
            int ahead = s;
            const int nr = r + kDirRow[h], nc = c + kDirCol[h];
            if (!wall_at(nr, nc))
                ahead = state_of(room_of[static_cast<std::size_t>(nr * plan_w + nc)], h);
            for (int a = 0; a < na; ++a) {
                auto put = [&](int target, double p) { m.add_t(a, s, target, p); };
                switch (a) {
                    case 0:  // forward: 0.8 ahead, heading slips otherwise
                        put(ahead, 1.0 - p_fail);
                        put(s, 0.05);
                        put(turned(3), 0.05);
                        put(turned(1), 0.05);
                        put(turned(2), 0.05);
                        break;
                    case 1:  // turn-left: 0.8 intended, 0.1 overshoot, 0.1 no-op
                        put(turned(3), 1.0 - p_fail);
                        put(turned(2), 0.1);
                        put(s, 0.1);
                        break;
                    case 2:  // turn-right
                        put(turned(1), 1.0 - p_fail);
                        put(turned(2), 0.1);
                        put(s, 0.1);
                        break;
                    case 3:  // turn-around: 0.8 intended, 0.1 each half turn
                        put(turned(2), 1.0 - p_fail);
                        put(turned(1), 0.1);
                        put(turned(3), 0.1);
                        break;
                    default:
                        put(s, 1.0);
                }
                if (ahead / 4 == goal_room && a == 0) m.r(s, a) = m.t(a, s, ahead) * 1.0;
            }
        }
    }
    for (int room = 0; room < n_rooms; ++room) {
        auto [r, c] = rooms[static_cast<std::size_t>(room)];
        for (int h = 0; h < 4; ++h) {
            const int s = state_of(room, h);
            if (room == goal_room) {
                for (int a = 0; a < na; ++a) m.z(a, s, 16) = 1.0;  // the star
                continue;
            }
            int truth = 0;
            for (int i = 0; i < 4; ++i) {  // front, right, back, left
                const int d = (h + i) % 4;
                if (wall_at(r + kDirRow[d], c + kDirCol[d])) truth |= 1 << i;
            }
            for (int o = 0; o < 16; ++o) {
                double p = 1.0;
                for (int i = 0; i < 4; ++i)
                    p *= ((o >> i) & 1) == ((truth >> i) & 1) ? 1.0 - p_obs : p_obs;
                for (int a = 0; a < na; ++a) m.z(a, s, o) = p;
            }
        }
    }
    m.start.assign(static_cast<std::size_t>(ns), 0.0);
    const int non_goal = ns - 4;
    for (int s = 0; s < ns; ++s)
        if (s / 4 != goal_room) m.start[static_cast<std::size_t>(s)] = 1.0 / non_goal;
    m.finalize();
    return m;
}

Hallway2Noise extract_hallway2_noise(const TabularPomdp& parsed) {
    // motion noise: 1 - dominant outcome probability, by majority over rows
    // whose dominant outcome actually moves the state
    std::vector<int> votes;
    std::vector<double> vals;
    for (int a = 0; a < parsed.n_actions(); ++a) {
        for (int s = 0; s < parsed.n_states(); ++s) {
            if (parsed.is_terminal(s)) continue;
            const auto& row = parsed.t_row(a, s);
            if (row.size() < 2) continue;
            double dominant = 0.0;
            int dominant_target = -1;
            for (const auto& e : row) {
                if (e.p > dominant) {
                    dominant = e.p;
                    dominant_target = e.index;
                }
            }
            if (dominant_target == s || dominant >= 1.0 || dominant < 0.5) continue;
            const double fail = 1.0 - dominant;
            bool found = false;
            for (std::size_t i = 0; i < vals.size(); ++i) {
                if (std::fabs(vals[i] - fail) < 1e-9) {
                    ++votes[i];
                    found = true;
                }
            }
            if (!found) {
                vals.push_back(fail);
                votes.push_back(1);
            }
        }
    }
    Hallway2Noise noise;
    int best = 0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (votes[i] > best) {
            best = votes[i];
            noise.p_fail = vals[i];
        }
    }
    // observation noise: largest Z entry of a non-goal row is (1-p)^bits
    double zmax = 0.0;
    for (int s = 0; s < parsed.n_states(); ++s) {
        if (parsed.is_terminal(s)) continue;
        for (const auto& e : parsed.z_row(0, s)) zmax = std::max(zmax, e.p);
    }
    if (zmax > 0.0 && zmax < 1.0) noise.p_obs_error = 1.0 - std::pow(zmax, 0.25);
    return noise;
}

GridEnv hallway2_grid_variant(std::uint64_t seed, const TabularPomdp& parsed) {
    Hallway2Noise noise = extract_hallway2_noise(parsed);
    GridEnv env = gen_grid_env(8, 0.25, seed);
    env.kind = DomainKind::kHallway2Grid;
    env.noise_fail = noise.p_fail;
    env.noise_obs = noise.p_obs_error;
    return env;
}

GridEnv hallway2_eval_layout(const TabularPomdp& parsed) {
    Hallway2Noise noise = extract_hallway2_noise(parsed);
    // the 23-room hallway floor plan: three 7-cell corridors joined by
    // single-cell links, drawn into an 8x8 board
    static const char* rows[8] = {
        "########",
        ".......#",
        "##.#####",
        ".......#",
        "####.###",
        ".......#",
        "########",
        "########",
    };
    GridEnv env;
    env.kind = DomainKind::kHallway2Grid;
    env.height = env.width = 8;
    env.noise_fail = noise.p_fail;
    env.noise_obs = noise.p_obs_error;
    env.obstacle.assign(64, 1);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            env.obstacle[static_cast<std::size_t>(env.cell(r, c))] = rows[r][c] == '#' ? 1 : 0;
    return env;
}

}  // namespace qmdpnet
