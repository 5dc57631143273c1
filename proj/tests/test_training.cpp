#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "asmatch/training.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace asmatch;
using namespace asmatch::testing;

namespace fs = std::filesystem;

TEST_SUITE_BEGIN("training");

namespace {

EncoderConfig tiny_config(int alphabet) {
    EncoderConfig cfg;
    cfg.hidden_dim = 16;
    cfg.layers = 2;
    cfg.interaction_dim = 8;
    cfg.heads = 4;
    cfg.label_alphabet = alphabet;
    cfg.encodings.mode = EncodingMode::RWSE;
    cfg.encodings.rwse_m = 4;
    return cfg;
}

DatasetManifest tiny_dataset(const std::string& tag, int pairs, std::vector<double> levels,
                             uint64_t seed) {
    fs::path dir = fs::temp_directory_path() / ("asmatch_train_" + tag);
    fs::remove_all(dir);
    DatasetConfig cfg;
    cfg.num_pairs = pairs;
    cfg.noise_levels = std::move(levels);
    cfg.num_targets = 2;
    cfg.target_nodes = 9;
    cfg.target_edges = 14;
    cfg.label_alphabet = 3;
    cfg.query_min = 3;
    cfg.query_max = 4;
    cfg.seed = seed;
    return generate_dataset(cfg, dir.string());
}

}  // namespace

TEST_CASE("expert trajectories follow the seed correspondence") {
    DatasetManifest manifest = tiny_dataset("expert", 20, {0.0, 0.1}, 3);
    std::vector<TrainPair> pairs = load_split(manifest, Split::Train);

    std::vector<ImitationExample> examples = gen_expert_trajectories(pairs);
    size_t expected = 0;
    for (const TrainPair& p : pairs) expected += p.pair->query.node_count();
    CHECK(examples.size() == expected);

    for (const TrainPair& p : pairs) {
        // replay the expert episode; the final mapping must equal the seed cost
        std::vector<int> prefix;
        for (int d = 0; d < p.pair->query.node_count(); ++d)
            prefix.push_back(p.seed_correspondence.target_of(p.pair->order.at(d)));
        SearchState final_state = state_for_prefix(p, prefix);
        EditCost cost = ged(final_state.mapping(), p.pair->query, p.pair->target);
        CHECK(cost.total() == p.meta.noise.applied());
        if (p.meta.noise.level == 0.0) CHECK(cost.total() == 0);
    }

    SUBCASE("expert targets are inside the presented action space") {
        for (const ImitationExample& ex : examples) {
            SearchState state = state_for_example(pairs, ex);
            bool found = false;
            for (const Action& a : action_space(state))
                if (a.target_node == ex.expert_target) found = true;
            CHECK(found);
        }
    }
}

TEST_CASE("imitation training learns a tiny corpus") {
    DatasetManifest manifest = tiny_dataset("il", 20, {0.0}, 5);
    std::vector<TrainPair> train = load_split(manifest, Split::Train);
    PolicyNet net(tiny_config(3), 21);

    ImitationConfig cfg;
    cfg.epochs = 150;
    cfg.batch_size = 16;
    cfg.lr = 3e-3;
    cfg.early_stop_train_accuracy = 0.995;
    cfg.seed = 9;

    std::ostringstream log;
    auto stats = train_imitation(net, train, {}, cfg, &log);
    REQUIRE(!stats.empty());
    CHECK(stats.back().loss < stats.front().loss);

    double acc = imitation_accuracy(net, train);
    CHECK(acc >= 0.95);  // a 16-pair zero-noise corpus is learnable

    SUBCASE("training accuracy implies zero-ged greedy rollouts") {
        if (acc >= 0.99) {
            double mean = mean_rollout_ged(net, train);
            CHECK(mean <= 0.05);
        }
    }
}

TEST_CASE("imitation step is deterministic from a fixed checkpoint") {
    DatasetManifest manifest = tiny_dataset("det", 12, {0.0}, 7);
    std::vector<TrainPair> train = load_split(manifest, Split::Train);
    std::vector<ImitationExample> examples = gen_expert_trajectories(train);
    std::vector<ImitationExample> batch(examples.begin(),
                                        examples.begin() + std::min<size_t>(8, examples.size()));
    ImitationConfig cfg;
    cfg.lr = 1e-3;

    PolicyNet a(tiny_config(3), 4);
    PolicyNet b(tiny_config(3), 4);
    StepResult ra = imitation_step(a, train, batch, cfg, 77);
    StepResult rb = imitation_step(b, train, batch, cfg, 77);
    CHECK(ra.loss == rb.loss);
    CHECK(ra.correct == rb.correct);

    // the next step sees identical parameters, so losses stay equal
    StepResult ra2 = imitation_step(a, train, batch, cfg, 78);
    StepResult rb2 = imitation_step(b, train, batch, cfg, 78);
    CHECK(ra2.loss == rb2.loss);
}

TEST_CASE("ppo batch collection") {
    DatasetManifest manifest = tiny_dataset("ppo", 12, {0.0, 0.1}, 11);
    std::vector<TrainPair> train = load_split(manifest, Split::Train);
    PolicyNet net(tiny_config(3), 31);
    net.set_training(false);

    PpoConfig cfg;
    cfg.batch_size = 40;
    cfg.seed = 13;

    SUBCASE("returns are normalized across the batch") {
        PPOBatch batch = ppo_collect(net, train, cfg, 0);
        CHECK(batch.transitions.size() >= 40);
        double mean = 0.0;
        for (const auto& t : batch.transitions) mean += t.norm_ret;
        mean /= batch.transitions.size();
        CHECK(std::fabs(mean) < 1e-10);
        double var = 0.0;
        for (const auto& t : batch.transitions) var += (t.norm_ret - mean) * (t.norm_ret - mean);
        var /= batch.transitions.size();
        CHECK(std::fabs(var - 1.0) < 1e-6);
    }

    SUBCASE("gamma zero reduces returns to immediate rewards") {
        PpoConfig g0 = cfg;
        g0.gamma = 0.0;
        PPOBatch batch = ppo_collect(net, train, g0, 1);
        for (const auto& t : batch.transitions) CHECK(t.ret == doctest::Approx(t.reward));
    }

    SUBCASE("collection is deterministic given the seed") {
        PPOBatch a = ppo_collect(net, train, cfg, 2);
        PPOBatch b = ppo_collect(net, train, cfg, 2);
        REQUIRE(a.transitions.size() == b.transitions.size());
        for (size_t i = 0; i < a.transitions.size(); ++i) {
            CHECK(a.transitions[i].chosen_target == b.transitions[i].chosen_target);
            CHECK(a.transitions[i].old_prob == b.transitions[i].old_prob);
        }
    }
}

TEST_CASE("clipped surrogate closed forms") {
    Tape tape(false);
    auto term = [&](double rho, double ret) {
        return clip_surrogate_term(tape, tape.input({1}, {rho}), ret, 0.2).scalar();
    };
    CHECK(std::fabs(term(1.0, 0.7) - 0.7) <= 1e-12);    // ratio 1: clip inactive
    CHECK(std::fabs(term(1.5, 1.0) - 1.2) <= 1e-12);    // clipped upward move
    CHECK(std::fabs(term(1.5, -1.0) - (-1.5)) <= 1e-12);  // clip never rescues bad moves
}

TEST_CASE("clip-active transitions carry no gradient") {
    ParamStore ps;
    ps.add("w", {1}, {std::log(1.5)});
    auto loss = [&](Tape& t) {
        Tensor rho = t.exp(t.param(ps, "w"));  // rho = 1.5, beyond 1 + 0.2
        return clip_surrogate_term(t, rho, 1.0, 0.2);
    };
    Tape tape(true);
    tape.backward(loss(tape));
    CHECK(tape.param_grads().at("w")[0] == 0.0);

    // with a negative return the unclipped branch is selected and does carry gradient
    ParamStore ps2;
    ps2.add("w", {1}, {std::log(1.5)});
    Tape tape2(true);
    Tensor rho2 = tape2.exp(tape2.param(ps2, "w"));
    tape2.backward(clip_surrogate_term(tape2, rho2, -1.0, 0.2));
    CHECK(tape2.param_grads().at("w")[0] != 0.0);
}

TEST_CASE("entropy bonus pushes toward uniform") {
    ParamStore ps;
    ps.add("logits", {1, 3}, {1.2, -0.3, 0.4});

    auto kl_to_uniform = [&](const std::vector<double>& probs) {
        double kl = 0.0;
        for (double p : probs) kl += p * std::log(p * 3.0);
        return kl;
    };

    Tape tape(true);
    Tensor probs = tape.softmax_rows(tape.param(ps, "logits"));
    std::vector<double> before = probs.values();
    Tensor loss = tape.sum(tape.mul(probs, tape.log(tape.clamp(probs, 1e-12, 1.0))));
    tape.backward(loss);  // loss = -H

    const auto& grad = tape.param_grads().at("logits");
    auto& logits = ps.at("logits").value;
    for (size_t i = 0; i < logits.size(); ++i) logits[i] -= 0.05 * grad[i];

    Tape after(false);
    std::vector<double> next = after.softmax_rows(after.param(ps, "logits")).values();
    CHECK(kl_to_uniform(next) < kl_to_uniform(before));
}

TEST_CASE("ppo loss at the old parameters reduces to the return mean plus entropy") {
    DatasetManifest manifest = tiny_dataset("ppoloss", 12, {0.0}, 17);
    std::vector<TrainPair> train = load_split(manifest, Split::Train);
    PolicyNet net(tiny_config(3), 41);
    net.set_training(false);

    PpoConfig cfg;
    cfg.batch_size = 20;
    cfg.seed = 29;
    PPOBatch batch = ppo_collect(net, train, cfg, 0);

    // theta == theta_old: every rho is exactly 1, so the clip term is -mean(norm_ret)
    double mean_ret = 0.0;
    for (const auto& t : batch.transitions) mean_ret += t.norm_ret;
    mean_ret /= batch.transitions.size();

    double entropy = 0.0;
    EncodingCache cache(net.config().encodings);
    for (const auto& t : batch.transitions) {
        SearchState state = state_for_prefix(train[t.pair_index], t.prefix_targets);
        NeuralPolicy policy(net, &cache);
        std::vector<double> probs = policy.scores(state, action_space(state));
        for (double p : probs)
            if (p > 0) entropy -= p * std::log(p);
    }
    entropy /= batch.transitions.size();

    double expected = -mean_ret - batch.entropy_coef * entropy;
    CHECK(ppo_loss(net, train, batch) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("ppo fine-tuning runs and logs") {
    DatasetManifest manifest = tiny_dataset("pporun", 12, {0.0}, 19);
    std::vector<TrainPair> train = load_split(manifest, Split::Train);
    std::vector<TrainPair> val = load_split(manifest, Split::Val);
    PolicyNet net(tiny_config(3), 51);

    PpoConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.minibatch_size = 8;
    cfg.minibatch_passes = 1;
    cfg.lr = 1e-4;
    cfg.seed = 3;

    std::ostringstream log;
    auto stats = train_ppo(net, train, val, cfg, &log);
    CHECK(stats.size() == 2);
    CHECK(log.str().find("\"phase\":\"ppo\"") != std::string::npos);
    for (const auto& s : stats) CHECK(std::isfinite(s.loss));
}

TEST_CASE("top-level train writes checkpoints, logs, and a run manifest") {
    DatasetManifest manifest = tiny_dataset("train_top", 20, {0.0}, 23);
    fs::path out = fs::temp_directory_path() / "asmatch_train_out";
    fs::remove_all(out);

    TrainRunConfig cfg;
    cfg.encoder = tiny_config(3);
    cfg.imitation.epochs = 2;
    cfg.imitation.batch_size = 16;
    cfg.imitation.seed = 1;
    cfg.ppo.batch_size = 12;
    cfg.ppo.minibatch_size = 6;
    cfg.ppo.minibatch_passes = 1;
    cfg.ppo_epochs = 1;
    cfg.seed = 5;
    cfg.out_dir = out.string();

    TrainRunResult result = train(manifest, cfg);
    CHECK(fs::exists(result.best_checkpoint));
    CHECK(fs::exists(result.last_checkpoint));
    CHECK(fs::exists(out / "train_log.jsonl"));
    CHECK(fs::exists(out / "run_manifest.json"));

    PolicyNet loaded = PolicyNet::from_checkpoint(result.best_checkpoint);
    CHECK(loaded.config().hidden_dim == 16);

    // imitation-only run reproduces the ablation setup
    TrainRunConfig il_only = cfg;
    il_only.out_dir = (fs::temp_directory_path() / "asmatch_train_out_il").string();
    fs::remove_all(il_only.out_dir);
    il_only.ppo_epochs = 0;
    TrainRunResult il_result = train(manifest, il_only);
    CHECK(fs::exists(il_result.best_checkpoint));

    std::ifstream log_file(fs::path(il_only.out_dir) / "train_log.jsonl");
    std::string line;
    int il_lines = 0;
    while (std::getline(log_file, line))
        if (line.find("\"phase\":\"il\"") != std::string::npos) ++il_lines;
    CHECK(il_lines == 2);
}

TEST_SUITE_END();
