#include "asmatch/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "json.hpp"

namespace asmatch {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int action_index_of(const SearchState& state, int target_node) {
    // actions are the unmapped targets in ascending order
    int index = 0;
    for (int v = 0; v < target_node; ++v)
        if (!state.mapping().target_mapped(v)) ++index;
    return index;
}

void fold_bn_stats(ParamStore& ps, const std::vector<BnBatchStat>& stats, double momentum) {
    for (const BnBatchStat& s : stats) {
        ParamEntry& rm = ps.at(s.prefix + ".running_mean");
        ParamEntry& rv = ps.at(s.prefix + ".running_var");
        for (size_t i = 0; i < rm.value.size(); ++i) {
            rm.value[i] = (1.0 - momentum) * rm.value[i] + momentum * s.mean[i];
            rv.value[i] = (1.0 - momentum) * rv.value[i] + momentum * s.var[i];
        }
    }
}

}  // namespace

std::vector<TrainPair> load_split(const DatasetManifest& manifest, Split split) {
    std::vector<TrainPair> out;
    for (const ManifestEntry& entry : manifest.pairs) {
        if (entry.split != split) continue;
        LoadedPair loaded = load_pair(manifest, entry);
        TrainPair tp;
        tp.pair = make_search_pair(std::move(loaded.query), std::move(loaded.target));
        tp.seed_correspondence = loaded.seed_correspondence;
        tp.meta = loaded.meta;
        out.push_back(std::move(tp));
    }
    return out;
}

std::vector<ImitationExample> gen_expert_trajectories(const std::vector<TrainPair>& pairs) {
    std::vector<ImitationExample> out;
    for (size_t p = 0; p < pairs.size(); ++p) {
        const int nq = pairs[p].pair->query.node_count();
        for (int depth = 0; depth < nq; ++depth) {
            ImitationExample ex;
            ex.pair_index = static_cast<int>(p);
            ex.depth = depth;
            ex.expert_target =
                pairs[p].seed_correspondence.target_of(pairs[p].pair->order.at(depth));
            out.push_back(ex);
        }
    }
    return out;
}

SearchState state_for_prefix(const TrainPair& pair, const std::vector<int>& prefix_targets) {
    SearchState state(pair.pair);
    for (int v : prefix_targets)
        state = apply_action(state, {state.next_query_node(), v});
    return state;
}

SearchState state_for_example(const std::vector<TrainPair>& pairs,
                              const ImitationExample& ex) {
    const TrainPair& tp = pairs[ex.pair_index];
    std::vector<int> prefix;
    prefix.reserve(ex.depth);
    for (int d = 0; d < ex.depth; ++d)
        prefix.push_back(tp.seed_correspondence.target_of(tp.pair->order.at(d)));
    return state_for_prefix(tp, prefix);
}

StepResult imitation_step(PolicyNet& net, const std::vector<TrainPair>& pairs,
                          const std::vector<ImitationExample>& batch,
                          const ImitationConfig& cfg, uint64_t step_seed) {
    const int n = static_cast<int>(batch.size());
    if (n == 0) return {};
    net.set_training(true);

    const int threads = thread_count();
    std::vector<GradMap> grads(threads);
    std::vector<std::vector<std::pair<int, BnBatchStat>>> bn(threads);
    std::vector<EncodingCache> caches(threads, EncodingCache(net.config().encodings));
    std::vector<double> losses(threads, 0.0);
    std::vector<int> corrects(threads, 0);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
#ifdef _OPENMP
        const int tid = omp_get_thread_num();
#else
        const int tid = 0;
#endif
        const ImitationExample& ex = batch[i];
        SearchState state = state_for_example(pairs, ex);
        std::vector<Action> actions = action_space(state);
        const int expert_index = action_index_of(state, ex.expert_target);

        Tape tape(true);
        tape.enable_dropout(derive_seed(step_seed, static_cast<uint64_t>(i)));
        Tensor probs = net.action_distribution(tape, state, actions, caches[tid]);
        Tensor p = tape.clamp(tape.pick(probs, expert_index), 1e-12, 1.0);
        Tensor loss = tape.scale(tape.log(p), -1.0);
        tape.backward(loss);

        losses[tid] += loss.scalar();
        int argmax = 0;
        const auto& row = probs.values();
        for (size_t j = 1; j < row.size(); ++j)
            if (row[j] > row[argmax]) argmax = static_cast<int>(j);
        if (argmax == expert_index) ++corrects[tid];

        for (const auto& [name, grad] : tape.param_grads()) {
            auto [it, inserted] = grads[tid].try_emplace(name, grad);
            if (!inserted)
                for (size_t k = 0; k < grad.size(); ++k) it->second[k] += grad[k];
        }
        for (const BnBatchStat& s : tape.bn_stats()) bn[tid].emplace_back(i, s);
    }

    GradMap total;
    for (const GradMap& g : grads)
        for (const auto& [name, grad] : g) {
            auto [it, inserted] = total.try_emplace(name, grad);
            if (!inserted)
                for (size_t k = 0; k < grad.size(); ++k) it->second[k] += grad[k];
        }
    for (auto& [name, grad] : total)
        for (double& v : grad) v /= n;

    std::vector<std::pair<int, BnBatchStat>> all_bn;
    for (auto& t : bn) all_bn.insert(all_bn.end(), t.begin(), t.end());
    std::stable_sort(all_bn.begin(), all_bn.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<BnBatchStat> ordered;
    ordered.reserve(all_bn.size());
    for (auto& [idx, s] : all_bn) ordered.push_back(std::move(s));
    fold_bn_stats(net.params(), ordered, cfg.bn_momentum);

    net.params().adamw_step(total, cfg.lr, cfg.weight_decay);

    StepResult result;
    result.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
    result.correct = std::accumulate(corrects.begin(), corrects.end(), 0);
    return result;
}

double imitation_accuracy(const PolicyNet& net, const std::vector<TrainPair>& pairs) {
    std::vector<ImitationExample> examples = gen_expert_trajectories(pairs);
    if (examples.empty()) return 0.0;
    net.set_training(false);

    const int threads = thread_count();
    std::vector<EncodingCache> caches(threads, EncodingCache(net.config().encodings));
    std::vector<int> corrects(threads, 0);
    const int n = static_cast<int>(examples.size());

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
#ifdef _OPENMP
        const int tid = omp_get_thread_num();
#else
        const int tid = 0;
#endif
        SearchState state = state_for_example(pairs, examples[i]);
        std::vector<Action> actions = action_space(state);
        Tape tape(false);
        Tensor probs = net.action_distribution(tape, state, actions, caches[tid]);
        const auto& row = probs.values();
        int argmax = 0;
        for (size_t j = 1; j < row.size(); ++j)
            if (row[j] > row[argmax]) argmax = static_cast<int>(j);
        if (argmax == action_index_of(state, examples[i].expert_target)) ++corrects[tid];
    }
    return static_cast<double>(std::accumulate(corrects.begin(), corrects.end(), 0)) / n;
}

double mean_rollout_ged(const PolicyNet& net, const std::vector<TrainPair>& pairs) {
    if (pairs.empty()) return 0.0;
    net.set_training(false);
    const int threads = thread_count();
    std::vector<EncodingCache> caches(threads, EncodingCache(net.config().encodings));
    std::vector<double> totals(threads, 0.0);
    const int n = static_cast<int>(pairs.size());

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
#ifdef _OPENMP
        const int tid = omp_get_thread_num();
#else
        const int tid = 0;
#endif
        NeuralPolicy policy(net, &caches[tid]);
        Rng rng = make_rng(0);  // greedy mode draws nothing
        Trajectory traj = rollout_episode(pairs[i].pair, policy, rng, RolloutMode::Greedy);
        totals[tid] += ged(traj.final_mapping, pairs[i].pair->query, pairs[i].pair->target).total();
    }
    return std::accumulate(totals.begin(), totals.end(), 0.0) / n;
}

std::vector<ImitationEpochStats> train_imitation(PolicyNet& net,
                                                 const std::vector<TrainPair>& train,
                                                 const std::vector<TrainPair>& val,
                                                 const ImitationConfig& cfg,
                                                 std::ostream* log, BestCheckpoint* best) {
    std::vector<ImitationExample> examples = gen_expert_trajectories(train);
    std::vector<int> order(examples.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<ImitationEpochStats> stats;
    const auto start = std::chrono::steady_clock::now();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        Rng rng = make_rng(derive_seed(cfg.seed, 0xE000 + epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        int correct = 0, seen = 0, steps = 0;
        for (size_t offset = 0; offset < order.size(); offset += cfg.batch_size) {
            std::vector<ImitationExample> batch;
            for (size_t i = offset; i < std::min(order.size(), offset + cfg.batch_size); ++i)
                batch.push_back(examples[order[i]]);
            StepResult r = imitation_step(net, train, batch, cfg,
                                          derive_seed(cfg.seed, 0xB000 + epoch * 100003 + steps));
            loss_sum += r.loss * batch.size();
            correct += r.correct;
            seen += static_cast<int>(batch.size());
            ++steps;
        }

        ImitationEpochStats s;
        s.epoch = epoch;
        s.loss = loss_sum / std::max(1, seen);
        s.running_accuracy = static_cast<double>(correct) / std::max(1, seen);
        s.val_mean_ged = val.empty() ? -1.0 : mean_rollout_ged(net, val);
        s.seconds = seconds_since(epoch_start);
        stats.push_back(s);

        if (log) {
            json line{{"phase", "il"},       {"epoch", epoch},
                      {"loss", s.loss},      {"train_acc", s.running_accuracy},
                      {"val_ged", s.val_mean_ged}, {"sec", s.seconds}};
            (*log) << line.dump() << "\n" << std::flush;
        }
        if (best && !val.empty() && (!best->valid || s.val_mean_ged < best->val_ged)) {
            best->val_ged = s.val_mean_ged;
            best->valid = true;
            if (!best->path.empty()) net.save(best->path);
        }

        if (cfg.early_stop_train_accuracy > 0.0 &&
            s.running_accuracy >= cfg.early_stop_train_accuracy) {
            if (imitation_accuracy(net, train) >= cfg.early_stop_train_accuracy) break;
        }
        if (cfg.max_seconds > 0.0 && seconds_since(start) > cfg.max_seconds) break;
    }
    net.set_training(false);
    return stats;
}

PPOBatch ppo_collect(const PolicyNet& net, const std::vector<TrainPair>& pairs,
                     const PpoConfig& cfg, uint64_t iteration) {
    if (pairs.empty()) throw ConfigError("ppo_collect needs a nonempty train split");
    net.set_training(false);

    PPOBatch batch;
    batch.clip = cfg.clip;
    batch.entropy_coef = cfg.entropy_coef;
    batch.gamma = cfg.gamma;

    Rng pick_rng = make_rng(derive_seed(cfg.seed, 0xC000 + iteration));
    EncodingCache cache(net.config().encodings);
    NeuralPolicy policy(net, &cache);

    uint64_t episode = 0;
    while (static_cast<int>(batch.transitions.size()) < cfg.batch_size) {
        const int pair_index = uniform_index(pick_rng, static_cast<int>(pairs.size()));
        Rng rng = make_rng(derive_seed(cfg.seed, 0xD000'0000 + iteration * 1000003 + episode));
        Trajectory traj = rollout_episode(pairs[pair_index].pair, policy, rng,
                                          RolloutMode::Sample);
        std::vector<double> returns = discounted_returns(traj, cfg.gamma);
        std::vector<int> prefix;
        for (size_t t = 0; t < traj.steps.size(); ++t) {
            PpoTransition tr;
            tr.pair_index = pair_index;
            tr.prefix_targets = prefix;
            tr.chosen_target = traj.steps[t].action.target_node;
            tr.old_prob = traj.steps[t].probability;
            tr.reward = traj.steps[t].reward.total();
            tr.ret = returns[t];
            batch.transitions.push_back(std::move(tr));
            prefix.push_back(traj.steps[t].action.target_node);
        }
        ++episode;
    }

    double mean = 0.0;
    for (const PpoTransition& t : batch.transitions) mean += t.ret;
    mean /= static_cast<double>(batch.transitions.size());
    double var = 0.0;
    for (const PpoTransition& t : batch.transitions) var += (t.ret - mean) * (t.ret - mean);
    var /= static_cast<double>(batch.transitions.size());
    const double stddev = std::sqrt(var);
    for (PpoTransition& t : batch.transitions)
        t.norm_ret = stddev < 1e-12 ? 0.0 : (t.ret - mean) / stddev;
    return batch;
}

Tensor clip_surrogate_term(Tape& tape, const Tensor& rho, double normalized_return,
                           double clip) {
    Tensor unclipped = tape.scale(rho, normalized_return);
    Tensor clipped = tape.scale(tape.clamp(rho, 1.0 - clip, 1.0 + clip), normalized_return);
    return tape.minimum(unclipped, clipped);
}

namespace {

Tensor ppo_transition_loss(Tape& tape, const PolicyNet& net,
                           const std::vector<TrainPair>& pairs, const PPOBatch& batch,
                           const PpoTransition& tr, EncodingCache& cache) {
    SearchState state = state_for_prefix(pairs[tr.pair_index], tr.prefix_targets);
    std::vector<Action> actions = action_space(state);
    Tensor probs = net.action_distribution(tape, state, actions, cache);
    Tensor p = tape.pick(probs, action_index_of(state, tr.chosen_target));
    Tensor rho = tape.scale(p, 1.0 / std::max(tr.old_prob, 1e-12));
    Tensor term = clip_surrogate_term(tape, rho, tr.norm_ret, batch.clip);
    Tensor safe = tape.clamp(probs, 1e-12, 1.0);
    Tensor entropy = tape.scale(tape.sum(tape.mul(probs, tape.log(safe))), -1.0);
    return tape.add(tape.scale(term, -1.0), tape.scale(entropy, -batch.entropy_coef));
}

}  // namespace

Tensor ppo_loss_on_tape(Tape& tape, const PolicyNet& net,
                        const std::vector<TrainPair>& pairs, const PPOBatch& batch,
                        const std::vector<int>& transition_indices, EncodingCache& cache) {
    if (transition_indices.empty()) throw ConfigError("empty ppo minibatch");
    std::vector<Tensor> terms;
    terms.reserve(transition_indices.size());
    for (int idx : transition_indices)
        terms.push_back(ppo_transition_loss(tape, net, pairs, batch, batch.transitions[idx],
                                            cache));
    return tape.scale(tape.add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

double ppo_loss(const PolicyNet& net, const std::vector<TrainPair>& pairs,
                const PPOBatch& batch) {
    net.set_training(false);
    Tape tape(false);
    EncodingCache cache(net.config().encodings);
    std::vector<int> all(batch.transitions.size());
    std::iota(all.begin(), all.end(), 0);
    return ppo_loss_on_tape(tape, net, pairs, batch, all, cache).scalar();
}

std::vector<PpoEpochStats> train_ppo(PolicyNet& net, const std::vector<TrainPair>& train,
                                     const std::vector<TrainPair>& val, const PpoConfig& cfg,
                                     std::ostream* log, BestCheckpoint* best) {
    std::vector<PpoEpochStats> stats;
    net.set_training(false);  // dropout and batch-norm stay frozen here

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        PPOBatch batch = ppo_collect(net, train, cfg, static_cast<uint64_t>(epoch));
        const int n = static_cast<int>(batch.transitions.size());

        double mean_return = 0.0;
        for (const PpoTransition& t : batch.transitions) mean_return += t.ret;
        mean_return /= n;

        Rng rng = make_rng(derive_seed(cfg.seed, 0xF000 + epoch));
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);

        double loss_sum = 0.0;
        int loss_count = 0;
        const int threads = thread_count();
        std::vector<EncodingCache> caches(threads, EncodingCache(net.config().encodings));

        for (int pass = 0; pass < cfg.minibatch_passes; ++pass) {
            std::shuffle(order.begin(), order.end(), rng);
            for (int offset = 0; offset < n; offset += cfg.minibatch_size) {
                const int count = std::min(cfg.minibatch_size, n - offset);
                std::vector<GradMap> grads(threads);
                std::vector<double> losses(threads, 0.0);

#pragma omp parallel for schedule(static)
                for (int i = 0; i < count; ++i) {
#ifdef _OPENMP
                    const int tid = omp_get_thread_num();
#else
                    const int tid = 0;
#endif
                    Tape tape(true);
                    Tensor loss = ppo_transition_loss(tape, net, train, batch,
                                                      batch.transitions[order[offset + i]],
                                                      caches[tid]);
                    tape.backward(loss);
                    losses[tid] += loss.scalar();
                    for (const auto& [name, grad] : tape.param_grads()) {
                        auto [it, inserted] = grads[tid].try_emplace(name, grad);
                        if (!inserted)
                            for (size_t k = 0; k < grad.size(); ++k) it->second[k] += grad[k];
                    }
                }

                GradMap total;
                for (const GradMap& g : grads)
                    for (const auto& [name, grad] : g) {
                        auto [it, inserted] = total.try_emplace(name, grad);
                        if (!inserted)
                            for (size_t k = 0; k < grad.size(); ++k) it->second[k] += grad[k];
                    }
                for (auto& [name, grad] : total)
                    for (double& v : grad) v /= count;

                net.params().adamw_step(total, cfg.lr, 0.0);
                loss_sum += std::accumulate(losses.begin(), losses.end(), 0.0);
                loss_count += count;
            }
        }

        PpoEpochStats s;
        s.epoch = epoch;
        s.loss = loss_sum / std::max(1, loss_count);
        s.mean_return = mean_return;
        s.val_mean_ged = val.empty() ? -1.0 : mean_rollout_ged(net, val);
        s.seconds = seconds_since(epoch_start);
        stats.push_back(s);

        if (log) {
            json line{{"phase", "ppo"},     {"epoch", epoch},
                      {"loss", s.loss},     {"mean_return", s.mean_return},
                      {"val_ged", s.val_mean_ged}, {"sec", s.seconds}};
            (*log) << line.dump() << "\n" << std::flush;
        }
        if (best && !val.empty() && (!best->valid || s.val_mean_ged < best->val_ged)) {
            best->val_ged = s.val_mean_ged;
            best->valid = true;
            if (!best->path.empty()) net.save(best->path);
        }
    }
    return stats;
}

TrainRunResult train(const DatasetManifest& manifest, const TrainRunConfig& cfg) {
    fs::create_directories(cfg.out_dir);

    PolicyNet net = cfg.resume_checkpoint.empty()
                        ? PolicyNet(cfg.encoder, derive_seed(cfg.seed, 0x1817))
                        : PolicyNet::from_checkpoint(cfg.resume_checkpoint);

    std::vector<TrainPair> train_split = load_split(manifest, Split::Train);
    std::vector<TrainPair> val_split = load_split(manifest, Split::Val);
    if (train_split.empty()) throw ConfigError("train split is empty");

    std::ofstream log(fs::path(cfg.out_dir) / "train_log.jsonl");
    if (!log) throw IoError("cannot write training log in " + cfg.out_dir);

    BestCheckpoint best;
    best.path = (fs::path(cfg.out_dir) / "best.ckpt").string();

    json run;
    run["seed"] = cfg.seed;
    run["threads"] = thread_count();
    run["dataset"] = manifest.dir;
    run["train_pairs"] = train_split.size();
    run["val_pairs"] = val_split.size();
    run["resume"] = cfg.resume_checkpoint;
    run["encoder"] = json::parse(net.params().meta());
    run["imitation"] = {{"epochs", cfg.imitation.epochs},
                        {"batch_size", cfg.imitation.batch_size},
                        {"lr", cfg.imitation.lr},
                        {"weight_decay", cfg.imitation.weight_decay},
                        {"bn_momentum", cfg.imitation.bn_momentum},
                        {"early_stop_train_accuracy", cfg.imitation.early_stop_train_accuracy},
                        {"max_seconds", cfg.imitation.max_seconds},
                        {"seed", cfg.imitation.seed}};
    run["ppo"] = {{"epochs", cfg.ppo_epochs},
                  {"batch_size", cfg.ppo.batch_size},
                  {"minibatch_passes", cfg.ppo.minibatch_passes},
                  {"minibatch_size", cfg.ppo.minibatch_size},
                  {"lr", cfg.ppo.lr},
                  {"clip", cfg.ppo.clip},
                  {"entropy_coef", cfg.ppo.entropy_coef},
                  {"gamma", cfg.ppo.gamma},
                  {"seed", cfg.ppo.seed}};
    {
        std::ofstream manifest_out(fs::path(cfg.out_dir) / "run_manifest.json");
        manifest_out << run.dump(2) << "\n";
    }

    if (cfg.imitation.epochs > 0)
        train_imitation(net, train_split, val_split, cfg.imitation, &log, &best);

    if (cfg.ppo_epochs > 0) {
        PpoConfig ppo = cfg.ppo;
        ppo.epochs = cfg.ppo_epochs;
        train_ppo(net, train_split, val_split, ppo, &log, &best);
    }

    TrainRunResult result;
    result.last_checkpoint = (fs::path(cfg.out_dir) / "last.ckpt").string();
    net.save(result.last_checkpoint);
    if (best.valid) {
        result.best_checkpoint = best.path;
        result.best_val_ged = best.val_ged;
    } else {
        result.best_checkpoint = result.last_checkpoint;
        net.save(best.path);
        result.best_checkpoint = best.path;
    }
    return result;
}

}  // namespace asmatch
