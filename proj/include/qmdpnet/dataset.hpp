#ifndef QMDPNET_DATASET_HPP
#define QMDPNET_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "qmdpnet/domains.hpp"
#include "qmdpnet/pomdp.hpp"

namespace qmdpnet {

// Domain recipe for environment/task generation.
struct DomainConfig {
    DomainKind kind = DomainKind::kGrid;
    Variant variant = Variant::kDeterministic;
    int n = 10;                  // board size; mazes need odd n
    double p_obstacle = 0.25;
    bool fixed_env = false;      // one environment, tasks vary
    std::vector<int> objects;    // grasp object ids; empty = training split
    std::string hallway2_pomdp;  // canonical model path for hallway2grid

    GridEnv make_env(int index, std::uint64_t master_seed) const;
};

// One supervised step: the (previous action, observation) pair the policy
// consumes and the demonstrated action it must predict. Step 0 uses the
// domain's stay index as prev_action (grasp, which has no stay action, uses
// the virtual index n_actions and the first update is correction-only).
struct TrajStep {
    std::uint8_t prev_action = 0;
    std::uint8_t observation = 0;
    std::uint8_t expert_action = 0;
};

struct Trajectory {
    int env_index = 0;
    TaskParams task;
    std::vector<TrajStep> steps;
    bool success = false;

    int length() const { return static_cast<int>(steps.size()); }
};

struct DatasetManifest {
    DomainKind kind = DomainKind::kGrid;
    Variant variant = Variant::kDeterministic;
    int n = 0;
    double p_obstacle = 0.25;
    bool fixed_env = false;
    int env_count = 0;
    int traj_count = 0;
    int trajs_per_env = 0;
    std::uint64_t seed = 0;
    int theta_channels = 0;
    int obs_bits = 0;
    int n_actions = 0;
    bool includes_failures = false;
    int expert_attempts = 0;   // attempted trajectories (for the success rate)
    int expert_successes = 0;
    int format_version = 1;
    double noise_fail = -1.0;  // hallway2grid noise copied into the envs
    double noise_obs = -1.0;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<GridEnv> envs;
    std::vector<Trajectory> trajectories;
    std::vector<int> train_idx, val_idx;  // split at trajectory granularity

    double expert_success_rate() const {
        return manifest.expert_attempts > 0
                   ? static_cast<double>(manifest.expert_successes) / manifest.expert_attempts
                   : 0.0;
    }
};

// Index the stay-style prior action used at step 0.
int reset_prev_action(const GridEnv& env);

// Runs the reference QMDP policy (value iteration + belief-weighted argmax +
// exact filter) in the simulator for every sampled task. With
// keep_failures = false (training data) unsuccessful trajectories are
// dropped, matching the expert-data protocol; test sets keep everything.
Dataset generate_expert_data(const DomainConfig& config, int num_envs, int trajs_per_env,
                             std::uint64_t seed, bool keep_failures = false, int threads = 1);

void save_dataset(const Dataset& dataset, const std::string& directory);
Dataset load_dataset(const std::string& directory);

// Seeded shuffle split at trajectory granularity; fills train_idx/val_idx.
void split_train_val(Dataset& dataset, double fraction, std::uint64_t seed);

bool dataset_deep_equal(const Dataset& a, const Dataset& b);
std::uint64_t dataset_checksum(const Dataset& d);

// Reference QMDP expert rollout for one task; exposed for the evaluator so
// measurement and generation share one code path.
struct ExpertRollout {
    Trajectory trajectory;
    std::vector<double> rewards;
    bool aborted = false;  // impossible observation during filtering
};
ExpertRollout run_expert_episode(const GridEnv& env, Variant variant, const TaskParams& task,
                                 const TabularPomdp& model, const QTable& q, Rng& rng);

}  // namespace qmdpnet

#endif
