#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "asmatch/datagen.hpp"
#include "asmatch/mdp.hpp"
#include "asmatch/policy_net.hpp"

namespace asmatch {

/// Dataset pair materialized for training, with the shared search context.
struct TrainPair {
    PairPtr pair;
    NodeMapping seed_correspondence;
    ManifestEntry meta;
};

std::vector<TrainPair> load_split(const DatasetManifest& manifest, Split split);

/// One supervised decision: the state is the expert prefix of length `depth`
/// along the mapping order; the action space is the full unpruned space.
struct ImitationExample {
    int pair_index = 0;
    int depth = 0;
    int expert_target = 0;
};

/// Expert actions replayed from the seed correspondence, one example per
/// query node per pair.
std::vector<ImitationExample> gen_expert_trajectories(const std::vector<TrainPair>& pairs);

SearchState state_for_prefix(const TrainPair& pair, const std::vector<int>& prefix_targets);
SearchState state_for_example(const std::vector<TrainPair>& pairs, const ImitationExample& ex);

struct ImitationConfig {
    int epochs = 1000;  // outer passes; early stop usually ends far sooner
    int batch_size = 1024;
    double lr = 1e-3;
    double weight_decay = 0.01;
    double bn_momentum = 0.1;
    double early_stop_train_accuracy = 0.0;  // 0 = never
    double max_seconds = 0.0;                // 0 = no wall guard
    uint64_t seed = 0;
};

struct ImitationEpochStats {
    int epoch = 0;
    double loss = 0.0;
    double running_accuracy = 0.0;  // argmax hits seen while training
    double val_mean_ged = -1.0;
    double seconds = 0.0;
};

/// One optimizer step over a batch of examples (dropout and batch-norm in
/// training mode); returns the mean cross-entropy and argmax hit count.
struct StepResult {
    double loss = 0.0;
    int correct = 0;
};
StepResult imitation_step(PolicyNet& net, const std::vector<TrainPair>& pairs,
                          const std::vector<ImitationExample>& batch,
                          const ImitationConfig& cfg, uint64_t step_seed);

/// Tracks the best validation score and its checkpoint file across phases.
struct BestCheckpoint {
    std::string path;  // empty = do not save
    double val_ged = -1.0;
    bool valid = false;
};

std::vector<ImitationEpochStats> train_imitation(PolicyNet& net,
                                                 const std::vector<TrainPair>& train,
                                                 const std::vector<TrainPair>& val,
                                                 const ImitationConfig& cfg,
                                                 std::ostream* log,
                                                 BestCheckpoint* best = nullptr);

/// Expert-action accuracy of the frozen net (eval mode, argmax).
double imitation_accuracy(const PolicyNet& net, const std::vector<TrainPair>& pairs);

/// Mean final-mapping ged of greedy backtracking-free rollouts.
double mean_rollout_ged(const PolicyNet& net, const std::vector<TrainPair>& pairs);

struct PpoTransition {
    int pair_index = 0;
    std::vector<int> prefix_targets;
    int chosen_target = 0;
    double old_prob = 0.0;
    double reward = 0.0;
    double ret = 0.0;       // discounted return
    double norm_ret = 0.0;  // batch-normalized return
};

struct PpoConfig {
    int epochs = 10;  // outer collect/update iterations
    int batch_size = 512;
    int minibatch_passes = 4;
    int minibatch_size = 64;
    double lr = 1e-3;
    double clip = 0.2;
    double entropy_coef = 0.01;
    double gamma = 0.99;
    uint64_t seed = 0;
};

struct PPOBatch {
    std::vector<PpoTransition> transitions;
    double clip = 0.2;
    double entropy_coef = 0.01;
    double gamma = 0.99;
};

/// Sampling rollouts (no backtracking) under the frozen current policy until
/// at least `batch_size` transitions; returns carry batch-normalized R_t.
PPOBatch ppo_collect(const PolicyNet& net, const std::vector<TrainPair>& pairs,
                     const PpoConfig& cfg, uint64_t iteration);

/// min(rho * ret, clip(rho) * ret) for one transition.
Tensor clip_surrogate_term(Tape& tape, const Tensor& rho, double normalized_return,
                           double clip);

/// Clipped-surrogate-plus-entropy objective over the given transitions,
/// differentiable through the current parameters.
Tensor ppo_loss_on_tape(Tape& tape, const PolicyNet& net,
                        const std::vector<TrainPair>& pairs, const PPOBatch& batch,
                        const std::vector<int>& transition_indices, EncodingCache& cache);

/// Loss value under the current parameters (eval forward).
double ppo_loss(const PolicyNet& net, const std::vector<TrainPair>& pairs,
                const PPOBatch& batch);

struct PpoEpochStats {
    int epoch = 0;
    double loss = 0.0;
    double mean_return = 0.0;
    double entropy = 0.0;
    double val_mean_ged = -1.0;
    double seconds = 0.0;
};

std::vector<PpoEpochStats> train_ppo(PolicyNet& net, const std::vector<TrainPair>& train,
                                     const std::vector<TrainPair>& val, const PpoConfig& cfg,
                                     std::ostream* log, BestCheckpoint* best = nullptr);

struct TrainRunConfig {
    EncoderConfig encoder;
    ImitationConfig imitation;
    PpoConfig ppo;
    int ppo_epochs = 0;  // 0 reproduces the imitation-only ablation
    uint64_t seed = 0;
    std::string out_dir;
    std::string resume_checkpoint;
};

struct TrainRunResult {
    std::string best_checkpoint;
    std::string last_checkpoint;
    double best_val_ged = 0.0;
};

/// Imitation phase then optional PPO phase; keeps the checkpoint with the
/// best validation mean ged, logs one structured line per epoch, and writes
/// a run manifest with every hyperparameter and seed.
TrainRunResult train(const DatasetManifest& manifest, const TrainRunConfig& cfg);

}  // namespace asmatch
