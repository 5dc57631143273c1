#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "asmatch/graph.hpp"
#include "asmatch/rng.hpp"

namespace asmatch {

struct NoiseSpec {
    double level = 0.0;
    int n_noise = 0;       // floor(level * (|V| + |E|))
    int n_node_noise = 0;  // label changes applied
    int n_edge_noise = 0;  // edges added (capped by the non-edge pool)
    int applied() const { return n_node_noise + n_edge_noise; }
};

enum class SampleMode { BFS, RW };

/// BFS discovery-order prefix of exactly `size` nodes from a random root;
/// neighbor expansion order is shuffled. Roots whose component is too small
/// are retried a bounded number of times.
std::vector<int> bfs_sample(const Graph& gt, int size, Rng& rng);

struct WalkSample {
    std::vector<int> nodes;                      // visited, ascending
    std::vector<std::pair<int, int>> edges;      // traversed, u < v, deduplicated
};

/// Uniform random walk of `steps` moves from a random non-isolated start,
/// recording visited nodes and traversed edges. The result need not be an
/// induced subgraph.
WalkSample rw_sample(const Graph& gt, int steps, Rng& rng);

/// Noise per the level: n_noise = floor(level * (|V|+|E|)), a uniform share
/// of it relabels nodes (never to the current label), the rest adds edges
/// among current non-edges. Infeasible draws are redrawn, then capped, with
/// the applied counts recorded.
std::pair<Graph, NoiseSpec> inject_noise(const Graph& seed_query, double level, Rng& rng);

/// Erdos-Renyi style G(n, m) with uniform labels.
Graph random_graph(int nodes, int edges, int label_alphabet, Rng& rng);

struct DatasetConfig {
    int num_pairs = 100;
    std::vector<double> noise_levels = {0.0, 0.05, 0.10};
    SampleMode mode = SampleMode::BFS;
    int query_min = 10;
    int query_max = 20;
    int rw_steps = 24;
    int num_targets = 20;
    int target_nodes = 100;
    int target_edges = 196;
    int label_alphabet = 13;
    int label_values_used = 0;  // 0 = whole alphabet; smaller value restricts draws
    std::vector<std::string> import_targets;  // graph files replacing the synthetic pool
    uint64_t seed = 0;
};

enum class Split { Train, Val, Test };

std::string split_name(Split s);
Split parse_split(const std::string& name);

struct ManifestEntry {
    int id = 0;
    std::string query_file;
    std::string target_file;
    Split split = Split::Train;
    SampleMode mode = SampleMode::BFS;
    NoiseSpec noise;
    uint64_t seed = 0;
    std::vector<int> correspondence;  // query node -> target node of the seed
};

struct DatasetManifest {
    DatasetConfig config;
    std::vector<ManifestEntry> pairs;
    std::string dir;
};

/// Generates, deduplicates, splits 8:1:1 (noise levels interleaved so every
/// split mixes all levels), and writes graph files plus manifest.json.
DatasetManifest generate_dataset(const DatasetConfig& cfg, const std::string& out_dir);

DatasetManifest load_manifest(const std::string& dir);

struct LoadedPair {
    Graph query;
    Graph target;
    NodeMapping seed_correspondence;
    ManifestEntry meta;
};

LoadedPair load_pair(const DatasetManifest& manifest, const ManifestEntry& entry);

}  // namespace asmatch
