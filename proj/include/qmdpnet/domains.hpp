#ifndef QMDPNET_DOMAINS_HPP
#define QMDPNET_DOMAINS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qmdpnet/pgm.hpp"
#include "qmdpnet/pomdp.hpp"
#include "qmdpnet/rng.hpp"
#include "qmdpnet/tensor.hpp"

namespace qmdpnet {

enum class DomainKind : std::uint8_t { kGrid, kMaze, kGrasp, kHallway2Grid };
enum class Variant : std::uint8_t { kDeterministic, kStochastic };

std::string domain_kind_name(DomainKind k);
std::string variant_name(Variant v);
DomainKind domain_kind_from_name(const std::string& s);
Variant variant_from_name(const std::string& s);

// Grid coordinates are (row, col), row-major, cell index = row * width + col.
// Action and observation-bit order is N,E,S,W with N = +row, E = +col; the
// world boundary counts as an obstacle for both motion and sensing.
inline constexpr int kDirRow[4] = {1, 0, -1, 0};
inline constexpr int kDirCol[4] = {0, 1, 0, -1};

// Action indices shared by the grid-family domains. Maze uses its own order
// (forward, turn-left, turn-right, stay); grasp has moves only.
inline constexpr int kGridStay = 4;
inline constexpr int kMazeForward = 0, kMazeTurnLeft = 1, kMazeTurnRight = 2, kMazeStay = 3;

struct GridEnv {
    DomainKind kind = DomainKind::kGrid;
    int height = 0;
    int width = 0;
    int orientations = 1;                 // 4 for maze
    std::vector<std::uint8_t> obstacle;   // row-major, 1 = obstacle

    // grasp only
    std::vector<std::uint8_t> object;     // object occupancy
    int grasp_row = -1, grasp_col = -1;   // marked grasp-point cell (above the top cell)

    // hallway2-grid only: noise magnitudes copied from the canonical model
    double noise_fail = -1.0;
    double noise_obs = -1.0;

    int cell(int row, int col) const { return row * width + col; }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height && col >= 0 && col < width;
    }
    bool obstacle_at(int row, int col) const {
        if (!in_bounds(row, col)) return true;  // boundary is an obstacle
        return obstacle[static_cast<std::size_t>(cell(row, col))] != 0;
    }
    bool object_at(int row, int col) const {
        if (!in_bounds(row, col)) return false;
        return !object.empty() && object[static_cast<std::size_t>(cell(row, col))] != 0;
    }
    int n_cells() const { return height * width; }
    int n_free() const;
    std::vector<int> free_cells() const;

    int n_actions() const;
    int n_states() const;        // cells x orientations
    int obs_bits() const;        // 4 nav, 6 grasp
    int n_task_obs() const { return 1 << obs_bits(); }
};

// Multi-channel task image: C0 obstacles, C1 goal cell (grasp-point cell for
// grasping), trailing channel(s) initial belief (4 orientation planes for
// maze). The true start and goal are kept outside theta; only the simulator
// reads them.
struct TaskParams {
    Tensor theta;  // H x W x C
    int start_state = -1;
    int goal_row = -1, goal_col = -1;

    int belief_channels() const { return theta.dim(2) - 2; }
};

// Grid: every cell is independently an obstacle with probability p
// (default 0.25); degenerate boards with fewer than two free cells are
// resampled a bounded number of times.
GridEnv gen_grid_env(int n, double p_obstacle, std::uint64_t seed);

// Perfect maze on an odd n x n board via randomized Kruskal on the
// passage lattice; the free space forms a spanning tree of the node graph.
GridEnv gen_maze_env(int n, std::uint64_t seed);

// One of 30 built-in skyline-polyomino objects (up to 6x6, each with at
// least one strictly protruding graspable column) placed on the bottom row
// of the 14x14 workspace at a seed-chosen position. Objects 0..19 form the
// training split, 20..29 the test split.
GridEnv gen_grasp_env(int object_id, std::uint64_t seed);
inline constexpr int kGraspObjectCount = 30;
inline constexpr int kGraspTrainObjects = 20;
inline constexpr int kGraspWorkspace = 14;

// Start/goal uniform over free cells (grasp: start anchor in the upper
// half), infeasible pairs rejected; belief support size drawn from
// {1, 2, ..., Nf/2, Nf}, support uniform over free states constrained to
// contain the true start, belief uniform over the support.
// forced_support_size > 0 pins the support size (tests).
TaskParams sample_task(const GridEnv& env, Rng& rng, int forced_support_size = 0);

// Physical ground-truth model: moves into obstacles/boundary stay in place
// (reward -10), every step costs -0.1, entering the goal pays +20 and the
// goal absorbs. The stochastic variant fails actions with P_t = 0.2 and
// flips each observation bit independently with P_o = 0.1.
// Grasp: reward 1 on reaching the grasp anchor, 0 elsewhere.
TabularPomdp build_ground_truth_pomdp(const GridEnv& env, Variant variant,
                                      const TaskParams& task);

// Spatially invariant sibling of the grid ground truth used by the
// weight-injection oracle: actions displace through obstacles, mass leaving
// the board lands in an extra absorbing void state (index H*W) whose only
// observation is the reserved 17th symbol. No state is absorbing-terminal;
// episode ends are the harness's concern. Grid domains only.
TabularPomdp build_shift_invariant_pomdp(const GridEnv& env, Variant variant,
                                         const TaskParams& task);
inline constexpr int kNavModelObs = 17;  // 16 bit patterns + reserved symbol

// Observation bits of a state under the domain rules (world-frame N,E,S,W
// for grid, body-frame front,right,back,left for maze, 6 touch bits for
// grasp). Bit i is the i-th least significant bit of the task observation.
int true_observation_pattern(const GridEnv& env, int state);

struct StepResult {
    int next_state = -1;
    int observation = -1;  // task-observation index (bit pattern)
    double reward = 0.0;
    bool done = false;
};

struct EpisodeState {
    int state = -1;
    int steps = 0;
    Rng rng;
};

// Simulator face of the ground-truth model; samples exactly its
// distributions. done = goal reached (before the step cap, which the
// caller tracks via EpisodeState).
StepResult env_step(const GridEnv& env, Variant variant, const TaskParams& task, int state,
                    int action, Rng& rng);
// Initial observation at reset, sampled from Z at the start state with the
// designated stay-style prior action.
int env_reset_observation(const GridEnv& env, Variant variant, int state, Rng& rng);

bool is_goal_state(const GridEnv& env, const TaskParams& task, int state);
int step_cap(const GridEnv& env);  // 10N navigation, 251 hallway2, 140 grasp

// Area-average downscale of an 8-bit P5 occupancy image; averaged pixel
// values below the threshold (default 128) become obstacles.
GridEnv load_occupancy_map(const PgmImage& img, int target_h, int target_w, int threshold = 128);
GridEnv load_occupancy_map_bytes(const std::vector<std::uint8_t>& pgm_bytes, int target_h,
                                 int target_w, int threshold = 128);

struct MapPreset {
    std::string name;
    int height = 0, width = 0;
    std::string file;  // relative to the data directory
};
const std::vector<MapPreset>& map_presets();  // intel, freiburg, belgioioso, mit
GridEnv load_preset_map(const std::string& name, const std::string& data_dir,
                        int threshold = 128);

// Random 8x8 grid with motion/observation noise magnitudes copied from the
// parsed canonical model, and the fixed evaluation layout that embeds the
// hallway floor plan with a uniform initial belief and a 251-step cap.
// Reconstruction of the classic 92-state hallway navigation benchmark from
// its published description: 23 rooms x 4 headings, actions
// {forward, turn-left, turn-right, turn-around, stay} succeeding with
// probability 0.8 (blocked forward moves stay put), four wall sensors
// relative to the heading each failing with probability 0.1 (16 wall
// patterns plus a deterministic goal star = 17 observations), reward +1 on
// entering the absorbing goal room, discount 0.95, start uniform over the
// non-goal states. Ships as data/hallway2.pomdp; a canonical benchmark file
// is a drop-in replacement.
TabularPomdp hallway2_reconstruction();

struct Hallway2Noise {
    double p_fail = 0.0;
    double p_obs_error = 0.0;
};
Hallway2Noise extract_hallway2_noise(const TabularPomdp& parsed);
// The returned env carries the extracted noise in noise_fail/noise_obs and
// has kind kHallway2Grid; build_ground_truth_pomdp applies those magnitudes.
GridEnv hallway2_grid_variant(std::uint64_t seed, const TabularPomdp& parsed);
GridEnv hallway2_eval_layout(const TabularPomdp& parsed);
inline constexpr int kHallway2StepCap = 251;

// BFS distance over the domain's motion graph from every state to the goal;
// unreachable states get -1. Used for feasibility checks.
std::vector<int> motion_distances_to_goal(const GridEnv& env, const TaskParams& task);
std::vector<int> motion_distances_to_goal(const GridEnv& env, int goal_row, int goal_col);

}  // namespace qmdpnet

#endif
