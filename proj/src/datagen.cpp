#include "asmatch/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace asmatch {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<int> bfs_sample(const Graph& gt, int size, Rng& rng) {
    const int n = gt.node_count();
    if (n == 0) throw EmptyGraph("bfs_sample on empty graph");
    if (size < 1 || size > n)
        throw SizeTooLarge("sample size " + std::to_string(size) + " not in [1, " +
                           std::to_string(n) + "]");

    constexpr int kRootRetries = 64;
    for (int attempt = 0; attempt < kRootRetries; ++attempt) {
        int root = uniform_index(rng, n);
        std::vector<int> order{root};
        std::vector<char> seen(n, 0);
        seen[root] = 1;
        std::queue<int> frontier;
        frontier.push(root);
        while (!frontier.empty() && static_cast<int>(order.size()) < size) {
            int u = frontier.front();
            frontier.pop();
            std::vector<int> nbrs = gt.neighbors(u);
            std::shuffle(nbrs.begin(), nbrs.end(), rng);
            for (int w : nbrs) {
                if (seen[w]) continue;
                seen[w] = 1;
                order.push_back(w);
                frontier.push(w);
                if (static_cast<int>(order.size()) == size) break;
            }
        }
        if (static_cast<int>(order.size()) == size) return order;
    }
    throw SizeTooLarge("no component with " + std::to_string(size) + " nodes found");
}

WalkSample rw_sample(const Graph& gt, int steps, Rng& rng) {
    const int n = gt.node_count();
    if (n == 0) throw EmptyGraph("rw_sample on empty graph");

    constexpr int kStartRetries = 64;
    int start = -1;
    for (int attempt = 0; attempt < kStartRetries && start < 0; ++attempt) {
        int v = uniform_index(rng, n);
        if (gt.degree(v) > 0 || steps == 0) start = v;
    }
    if (start < 0) throw SizeTooLarge("no start node with positive degree");

    std::set<int> nodes{start};
    std::set<std::pair<int, int>> edges;
    int current = start;
    for (int s = 0; s < steps; ++s) {
        const auto& nbrs = gt.neighbors(current);
        int next = nbrs[uniform_index(rng, static_cast<int>(nbrs.size()))];
        edges.insert({std::min(current, next), std::max(current, next)});
        nodes.insert(next);
        current = next;
    }
    return {std::vector<int>(nodes.begin(), nodes.end()),
            std::vector<std::pair<int, int>>(edges.begin(), edges.end())};
}

std::pair<Graph, NoiseSpec> inject_noise(const Graph& seed_query, double level, Rng& rng) {
    if (level < 0.0) throw ConfigError("noise level must be nonnegative");
    const int n = seed_query.node_count();
    const int m = seed_query.edge_count();

    NoiseSpec spec;
    spec.level = level;
    spec.n_noise = static_cast<int>(std::floor(level * (n + m)));
    if (spec.n_noise == 0) return {seed_query, spec};

    std::vector<std::pair<int, int>> non_edges;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            if (!seed_query.has_edge(u, v)) non_edges.emplace_back(u, v);

    const int max_node = seed_query.label_alphabet() >= 2 ? n : 0;
    const int max_edge = static_cast<int>(non_edges.size());

    int n_node = std::uniform_int_distribution<int>(0, spec.n_noise)(rng);
    for (int redraw = 0; redraw < 100; ++redraw) {
        if (n_node <= max_node && spec.n_noise - n_node <= max_edge) break;
        n_node = std::uniform_int_distribution<int>(0, spec.n_noise)(rng);
    }
    n_node = std::min(n_node, max_node);
    int n_edge = std::min(spec.n_noise - n_node, max_edge);
    spec.n_node_noise = n_node;
    spec.n_edge_noise = n_edge;

    std::vector<int> labels = seed_query.labels();
    std::vector<int> node_ids(n);
    for (int i = 0; i < n; ++i) node_ids[i] = i;
    std::shuffle(node_ids.begin(), node_ids.end(), rng);
    for (int i = 0; i < n_node; ++i) {
        int u = node_ids[i];
        int draw = std::uniform_int_distribution<int>(0, seed_query.label_alphabet() - 2)(rng);
        labels[u] = draw >= labels[u] ? draw + 1 : draw;  // never the current label
    }

    std::shuffle(non_edges.begin(), non_edges.end(), rng);
    std::vector<std::pair<int, int>> edges = seed_query.edges();
    edges.insert(edges.end(), non_edges.begin(), non_edges.begin() + n_edge);

    return {Graph(seed_query.label_alphabet(), std::move(labels), edges), spec};
}

Graph random_graph(int nodes, int edges, int label_alphabet, Rng& rng) {
    const int64_t max_edges = static_cast<int64_t>(nodes) * (nodes - 1) / 2;
    if (edges > max_edges)
        throw ConfigError("cannot place " + std::to_string(edges) + " edges on " +
                          std::to_string(nodes) + " nodes");
    std::set<std::pair<int, int>> chosen;
    while (static_cast<int>(chosen.size()) < edges) {
        int u = uniform_index(rng, nodes);
        int v = uniform_index(rng, nodes);
        if (u == v) continue;
        chosen.insert({std::min(u, v), std::max(u, v)});
    }
    std::vector<int> labels(nodes);
    for (int& l : labels) l = uniform_index(rng, label_alphabet);
    return Graph(label_alphabet, std::move(labels),
                 std::vector<std::pair<int, int>>(chosen.begin(), chosen.end()));
}

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw ParseError("unknown split: " + name);
}

namespace {

struct CandidatePair {
    Graph query;
    NoiseSpec noise;
    std::vector<int> correspondence;
    int target_index = 0;
    uint64_t seed = 0;
};

CandidatePair make_candidate(const DatasetConfig& cfg, const std::vector<Graph>& targets,
                             double level, uint64_t seed) {
    Rng rng = make_rng(seed);
    CandidatePair cand;
    cand.seed = seed;
    cand.target_index = uniform_index(rng, static_cast<int>(targets.size()));
    const Graph& gt = targets[cand.target_index];

    Graph seed_query;
    if (cfg.mode == SampleMode::BFS) {
        int hi = std::min(cfg.query_max, gt.node_count());
        int lo = std::min(cfg.query_min, hi);
        int size = std::uniform_int_distribution<int>(lo, hi)(rng);
        InducedSubgraph sub = induced_subgraph(gt, bfs_sample(gt, size, rng));
        seed_query = std::move(sub.graph);
        cand.correspondence = std::move(sub.original_nodes);
    } else {
        WalkSample walk = rw_sample(gt, cfg.rw_steps, rng);
        std::vector<int> to_new(gt.node_count(), -1);
        for (size_t i = 0; i < walk.nodes.size(); ++i) to_new[walk.nodes[i]] = static_cast<int>(i);
        std::vector<int> labels(walk.nodes.size());
        for (size_t i = 0; i < walk.nodes.size(); ++i) labels[i] = gt.label(walk.nodes[i]);
        std::vector<std::pair<int, int>> edges;
        for (auto [u, v] : walk.edges) edges.emplace_back(to_new[u], to_new[v]);
        seed_query = Graph(gt.label_alphabet(), std::move(labels), edges);
        cand.correspondence = std::move(walk.nodes);
    }

    auto [noisy, spec] = inject_noise(seed_query, level, rng);
    cand.query = std::move(noisy);
    cand.noise = spec;
    return cand;
}

json noise_to_json(const NoiseSpec& s) {
    return json{{"level", s.level},
                {"n_noise", s.n_noise},
                {"n_node_noise", s.n_node_noise},
                {"n_edge_noise", s.n_edge_noise}};
}

NoiseSpec noise_from_json(const json& j) {
    NoiseSpec s;
    s.level = j.at("level").get<double>();
    s.n_noise = j.at("n_noise").get<int>();
    s.n_node_noise = j.at("n_node_noise").get<int>();
    s.n_edge_noise = j.at("n_edge_noise").get<int>();
    return s;
}

}  // namespace

DatasetManifest generate_dataset(const DatasetConfig& cfg, const std::string& out_dir) {
    if (cfg.num_pairs <= 0) throw ConfigError("num_pairs must be positive");
    if (cfg.noise_levels.empty()) throw ConfigError("need at least one noise level");
    for (double l : cfg.noise_levels)
        if (l < 0.0 || l >= 1.0) throw ConfigError("noise level must be in [0, 1)");
    if (cfg.query_min < 1 || cfg.query_min > cfg.query_max)
        throw ConfigError("bad query size range");
    if (cfg.label_values_used < 0 || cfg.label_values_used > cfg.label_alphabet)
        throw ConfigError("label_values_used outside alphabet");

    fs::create_directories(out_dir);
    fs::create_directories(fs::path(out_dir) / "graphs");

    std::vector<Graph> targets;
    std::vector<std::string> target_files;
    if (!cfg.import_targets.empty()) {
        for (const std::string& path : cfg.import_targets) {
            targets.push_back(load_graph(path));
            std::string name = "graphs/target_" + std::to_string(targets.size() - 1) + ".json";
            save_graph(targets.back(), (fs::path(out_dir) / name).string());
            target_files.push_back(name);
        }
    } else {
        if (cfg.query_max > cfg.target_nodes)
            throw ConfigError("query_max exceeds target size");
        for (int i = 0; i < cfg.num_targets; ++i) {
            Rng rng = make_rng(derive_seed(cfg.seed, 0x7A000000ULL + i));
            int alphabet_used =
                cfg.label_values_used > 0 ? cfg.label_values_used : cfg.label_alphabet;
            Graph g = random_graph(cfg.target_nodes, cfg.target_edges, alphabet_used, rng);
            if (alphabet_used != cfg.label_alphabet)
                g = Graph(cfg.label_alphabet, g.labels(), g.edges());
            targets.push_back(std::move(g));
            std::string name = "graphs/target_" + std::to_string(i) + ".json";
            save_graph(targets.back(), (fs::path(out_dir) / name).string());
            target_files.push_back(name);
        }
    }

    DatasetManifest manifest;
    manifest.config = cfg;
    manifest.dir = out_dir;

    std::unordered_set<std::string> seen;
    uint64_t attempt = 0;
    const uint64_t max_attempts = static_cast<uint64_t>(cfg.num_pairs) * 64;
    std::vector<CandidatePair> accepted;
    while (static_cast<int>(accepted.size()) < cfg.num_pairs) {
        if (attempt >= max_attempts)
            throw ConfigError("dedup shortfall: could not generate enough unique pairs");
        double level = cfg.noise_levels[accepted.size() % cfg.noise_levels.size()];
        uint64_t seed = derive_seed(cfg.seed, 0xA000000 + attempt);
        ++attempt;
        CandidatePair cand;
        try {
            cand = make_candidate(cfg, targets, level, seed);
        } catch (const SizeTooLarge&) {
            continue;
        }
        std::string key = serialize_graph(cand.query) + "|" +
                          std::to_string(cand.target_index);
        if (!seen.insert(key).second) continue;
        accepted.push_back(std::move(cand));
    }

    // interleave levels, then cut so each split mixes every level
    const size_t num_levels = cfg.noise_levels.size();
    std::vector<int> order(accepted.size());
    {
        size_t pos = 0;
        std::vector<std::vector<int>> by_level(num_levels);
        for (size_t j = 0; j < accepted.size(); ++j)
            by_level[j % num_levels].push_back(static_cast<int>(j));
        size_t row = 0;
        while (pos < accepted.size()) {
            for (size_t l = 0; l < num_levels; ++l)
                if (row < by_level[l].size()) order[pos++] = by_level[l][row];
            ++row;
        }
    }

    const int total = cfg.num_pairs;
    const int n_val = std::max(1, static_cast<int>(std::llround(total * 0.1)));
    const int n_test = n_val;
    const int n_train = total - n_val - n_test;
    if (n_train <= 0) throw ConfigError("dataset too small for an 8:1:1 split");

    for (int pos = 0; pos < total; ++pos) {
        const CandidatePair& cand = accepted[order[pos]];
        ManifestEntry entry;
        entry.id = pos;
        entry.split = pos < n_train ? Split::Train : (pos < n_train + n_val ? Split::Val : Split::Test);
        entry.mode = cfg.mode;
        entry.noise = cand.noise;
        entry.seed = cand.seed;
        entry.correspondence = cand.correspondence;
        entry.target_file = target_files[cand.target_index];
        std::ostringstream name;
        name << "graphs/query_" << pos << ".json";
        entry.query_file = name.str();
        save_graph(cand.query, (fs::path(out_dir) / entry.query_file).string());
        manifest.pairs.push_back(std::move(entry));
    }

    json j;
    j["format"] = 1;
    j["config"] = {{"num_pairs", cfg.num_pairs},
                   {"noise_levels", cfg.noise_levels},
                   {"mode", cfg.mode == SampleMode::BFS ? "bfs" : "rw"},
                   {"query_min", cfg.query_min},
                   {"query_max", cfg.query_max},
                   {"rw_steps", cfg.rw_steps},
                   {"num_targets", cfg.num_targets},
                   {"target_nodes", cfg.target_nodes},
                   {"target_edges", cfg.target_edges},
                   {"label_alphabet", cfg.label_alphabet},
                   {"label_values_used", cfg.label_values_used},
                   {"import_targets", cfg.import_targets},
                   {"seed", cfg.seed}};
    json pairs = json::array();
    for (const ManifestEntry& e : manifest.pairs) {
        pairs.push_back({{"id", e.id},
                         {"query", e.query_file},
                         {"target", e.target_file},
                         {"split", split_name(e.split)},
                         {"mode", e.mode == SampleMode::BFS ? "bfs" : "rw"},
                         {"noise", noise_to_json(e.noise)},
                         {"seed", e.seed},
                         {"correspondence", e.correspondence}});
    }
    j["pairs"] = std::move(pairs);
    std::ofstream out(fs::path(out_dir) / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + out_dir);
    out << j.dump(2) << "\n";

    return manifest;
}

DatasetManifest load_manifest(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw IoError("no manifest.json in " + dir);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    DatasetManifest manifest;
    manifest.dir = dir;
    const json& c = j.at("config");
    manifest.config.num_pairs = c.at("num_pairs").get<int>();
    manifest.config.noise_levels = c.at("noise_levels").get<std::vector<double>>();
    manifest.config.mode = c.at("mode").get<std::string>() == "bfs" ? SampleMode::BFS : SampleMode::RW;
    manifest.config.query_min = c.at("query_min").get<int>();
    manifest.config.query_max = c.at("query_max").get<int>();
    manifest.config.rw_steps = c.at("rw_steps").get<int>();
    manifest.config.num_targets = c.at("num_targets").get<int>();
    manifest.config.target_nodes = c.at("target_nodes").get<int>();
    manifest.config.target_edges = c.at("target_edges").get<int>();
    manifest.config.label_alphabet = c.at("label_alphabet").get<int>();
    manifest.config.label_values_used = c.value("label_values_used", 0);
    manifest.config.import_targets = c.at("import_targets").get<std::vector<std::string>>();
    manifest.config.seed = c.at("seed").get<uint64_t>();
    for (const json& p : j.at("pairs")) {
        ManifestEntry e;
        e.id = p.at("id").get<int>();
        e.query_file = p.at("query").get<std::string>();
        e.target_file = p.at("target").get<std::string>();
        e.split = parse_split(p.at("split").get<std::string>());
        e.mode = p.at("mode").get<std::string>() == "bfs" ? SampleMode::BFS : SampleMode::RW;
        e.noise = noise_from_json(p.at("noise"));
        e.seed = p.at("seed").get<uint64_t>();
        e.correspondence = p.at("correspondence").get<std::vector<int>>();
        manifest.pairs.push_back(std::move(e));
    }
    return manifest;
}

LoadedPair load_pair(const DatasetManifest& manifest, const ManifestEntry& entry) {
    LoadedPair pair;
    pair.query = load_graph((fs::path(manifest.dir) / entry.query_file).string());
    pair.target = load_graph((fs::path(manifest.dir) / entry.target_file).string());
    pair.meta = entry;
    pair.seed_correspondence = NodeMapping(pair.query.node_count(), pair.target.node_count());
    for (size_t u = 0; u < entry.correspondence.size(); ++u)
        pair.seed_correspondence =
            pair.seed_correspondence.extended(static_cast<int>(u), entry.correspondence[u]);
    return pair;
}

}  // namespace asmatch
