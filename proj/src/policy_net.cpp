#include "asmatch/policy_net.hpp"

#include <cmath>

#include "json.hpp"

namespace asmatch {

using nlohmann::json;

CrossGraphLinks build_links(const SearchState& state) {
    const int nq = state.pair().query.node_count();
    const int nt = state.pair().target.node_count();
    const NodeMapping& m = state.mapping();
    CrossGraphLinks links;
    links.query_to_target = DenseMatrix(nq, nt);
    links.target_to_query = DenseMatrix(nt, nq);
    for (int u = 0; u < nq; ++u) {
        if (m.query_mapped(u)) {
            links.query_to_target.at(u, m.target_of(u)) = 1.0;
        } else {
            for (int v = 0; v < nt; ++v)
                if (!m.target_mapped(v)) links.query_to_target.at(u, v) = 1.0;
        }
    }
    for (int v = 0; v < nt; ++v) {
        if (m.target_mapped(v)) {
            links.target_to_query.at(v, m.query_of(v)) = 1.0;
        } else {
            for (int u = 0; u < nq; ++u)
                if (!m.query_mapped(u)) links.target_to_query.at(v, u) = 1.0;
        }
    }
    return links;
}

namespace {

std::string mode_name(EncodingMode mode) {
    switch (mode) {
        case EncodingMode::None: return "none";
        case EncodingMode::LapPE: return "lappe";
        case EncodingMode::RWSE: return "rwse";
        case EncodingMode::Both: return "both";
    }
    return "rwse";
}

EncodingMode mode_from_name(const std::string& name) {
    if (name == "none") return EncodingMode::None;
    if (name == "lappe") return EncodingMode::LapPE;
    if (name == "rwse") return EncodingMode::RWSE;
    if (name == "both") return EncodingMode::Both;
    throw ParseError("unknown encoding mode: " + name);
}

struct Initializer {
    ParamStore& ps;
    Rng rng;

    void xavier(const std::string& name, int fan_in, int fan_out, std::vector<int> shape) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        size_t total = 1;
        for (int d : shape) total *= static_cast<size_t>(d);
        std::vector<double> values(total);
        for (double& v : values) v = dist(rng);
        ps.add(name, std::move(shape), std::move(values));
    }
    void linear(const std::string& prefix, int in, int out) {
        xavier(prefix + ".w", in, out, {in, out});
        ps.add(prefix + ".b", {out}, std::vector<double>(out, 0.0));
    }
    void norm(const std::string& prefix, int width) {
        ps.add(prefix + ".g", {width}, std::vector<double>(width, 1.0));
        ps.add(prefix + ".b", {width}, std::vector<double>(width, 0.0));
    }
    void attention(const std::string& prefix, int d) {
        for (const char* part : {"q", "k", "v", "o"})
            linear(prefix + "." + part, d, d);
    }
};

}  // namespace

PolicyNet::PolicyNet(EncoderConfig cfg, uint64_t init_seed) : cfg_(cfg) {
    if (cfg_.hidden_dim % cfg_.heads != 0)
        throw ConfigError("hidden_dim must be divisible by the head count");
    const int d = cfg_.hidden_dim;
    const int pos_dim = pos_struct_dim(cfg_.encodings);
    Initializer init{params_, make_rng(init_seed)};

    init.linear("in.label", cfg_.label_alphabet, d);
    init.linear("in.flag", 1, d);
    if (pos_dim > 0) init.linear("in.pos", pos_dim, d);
    init.linear("in.combine", pos_dim > 0 ? 3 * d : 2 * d, d);

    for (int l = 0; l < cfg_.layers; ++l) {
        std::string p = "enc.l" + std::to_string(l);
        for (const char* w : {"u", "v", "a", "b"})
            init.xavier(p + ".mpnn." + w, d, d, {d, d});
        init.attention(p + ".attn", d);
        init.linear(p + ".mlp.1", d, d);
        init.linear(p + ".mlp.2", d, d);
        init.norm(p + ".ln", d);
        for (const char* side : {"q", "t"}) {
            std::string ip = p + ".inter." + side;
            init.xavier(ip + ".w1", d, d, {d, d});
            init.xavier(ip + ".w2", d, d, {d, d});
            init.xavier(ip + ".wq", d, d, {d, d});
            init.xavier(ip + ".wk", d, d, {d, d});
        }
    }

    init.linear("jk", cfg_.layers * d, d);
    init.attention("dec.attn", d);
    init.xavier("dec.w3", d, d * cfg_.interaction_dim, {d, d, cfg_.interaction_dim});
    init.linear("head.1", d + cfg_.interaction_dim, d);
    init.norm("head.bn", d);
    params_.add("head.bn.running_mean", {d}, std::vector<double>(d, 0.0), false);
    params_.add("head.bn.running_var", {d}, std::vector<double>(d, 1.0), false);
    init.linear("head.2", d, 1);

    json meta;
    meta["hidden_dim"] = cfg_.hidden_dim;
    meta["layers"] = cfg_.layers;
    meta["interaction_dim"] = cfg_.interaction_dim;
    meta["heads"] = cfg_.heads;
    meta["mode"] = mode_name(cfg_.encodings.mode);
    meta["lap_k"] = cfg_.encodings.lap_k;
    meta["rwse_m"] = cfg_.encodings.rwse_m;
    meta["global_attention"] = cfg_.global_attention;
    meta["dropout"] = cfg_.dropout;
    meta["label_alphabet"] = cfg_.label_alphabet;
    params_.set_meta(meta.dump());
}

PolicyNet PolicyNet::from_checkpoint(const std::string& path) {
    ParamStore ps = ParamStore::load(path);
    json meta = json::parse(ps.meta());
    EncoderConfig cfg;
    cfg.hidden_dim = meta.at("hidden_dim").get<int>();
    cfg.layers = meta.at("layers").get<int>();
    cfg.interaction_dim = meta.at("interaction_dim").get<int>();
    cfg.heads = meta.at("heads").get<int>();
    cfg.encodings.mode = mode_from_name(meta.at("mode").get<std::string>());
    cfg.encodings.lap_k = meta.at("lap_k").get<int>();
    cfg.encodings.rwse_m = meta.at("rwse_m").get<int>();
    cfg.global_attention = meta.at("global_attention").get<bool>();
    cfg.dropout = meta.at("dropout").get<double>();
    cfg.label_alphabet = meta.at("label_alphabet").get<int>();

    PolicyNet net(cfg, 0);
    net.params_ = std::move(ps);
    return net;
}

void PolicyNet::save(const std::string& path) const { params_.save(path); }

Tensor PolicyNet::embed_graph(Tape& tape, const Graph& g,
                              const std::vector<double>& mapped_flag, const DenseMatrix& pos,
                              const char*) const {
    const int n = g.node_count();
    NodeFeatureSet fs = assemble_features(g, {}, cfg_.encodings, &pos);

    Tensor onehot = tape.input({n, g.label_alphabet()}, fs.label_onehot.data);
    Tensor flag = tape.input({n, 1}, mapped_flag);

    std::vector<Tensor> families;
    families.push_back(tape.add_bias(tape.matmul(onehot, tape.param(params_, "in.label.w")),
                                     tape.param(params_, "in.label.b")));
    families.push_back(tape.add_bias(tape.matmul(flag, tape.param(params_, "in.flag.w")),
                                     tape.param(params_, "in.flag.b")));
    if (pos_struct_dim(cfg_.encodings) > 0) {
        Tensor posf = tape.input({n, pos.cols}, pos.data);
        families.push_back(tape.add_bias(tape.matmul(posf, tape.param(params_, "in.pos.w")),
                                         tape.param(params_, "in.pos.b")));
    }
    return tape.add_bias(tape.matmul(tape.concat_cols(families),
                                     tape.param(params_, "in.combine.w")),
                         tape.param(params_, "in.combine.b"));
}

Tensor PolicyNet::self_attention(Tape& tape, const Tensor& x, const std::string& prefix,
                                 const DenseMatrix* mask, const Tensor* keys) const {
    const Tensor& kv = keys ? *keys : x;
    Tensor q = tape.add_bias(tape.matmul(x, tape.param(params_, prefix + ".q.w")),
                             tape.param(params_, prefix + ".q.b"));
    Tensor k = tape.add_bias(tape.matmul(kv, tape.param(params_, prefix + ".k.w")),
                             tape.param(params_, prefix + ".k.b"));
    Tensor v = tape.add_bias(tape.matmul(kv, tape.param(params_, prefix + ".v.w")),
                             tape.param(params_, prefix + ".v.b"));
    Tensor att = tape.multihead_attention(q, k, v, mask, cfg_.heads);
    return tape.add_bias(tape.matmul(att, tape.param(params_, prefix + ".o.w")),
                         tape.param(params_, prefix + ".o.b"));
}

Tensor PolicyNet::intra_layer(Tape& tape, const Tensor& x,
                              const std::vector<std::pair<int, int>>& edges, int layer) const {
    const std::string p = "enc.l" + std::to_string(layer);
    Tensor hu = tape.matmul(x, tape.param(params_, p + ".mpnn.u"));
    Tensor hv = tape.matmul(x, tape.param(params_, p + ".mpnn.v"));
    Tensor ha = tape.matmul(x, tape.param(params_, p + ".mpnn.a"));
    Tensor hb = tape.matmul(x, tape.param(params_, p + ".mpnn.b"));
    Tensor x_m = tape.add(hu, tape.gated_neighbor_sum(ha, hb, hv, edges));

    Tensor pre_mlp = x_m;
    if (cfg_.global_attention)
        pre_mlp = tape.add(x_m, self_attention(tape, x, p + ".attn", nullptr, nullptr));

    Tensor hidden = tape.relu(tape.add_bias(tape.matmul(pre_mlp, tape.param(params_, p + ".mlp.1.w")),
                                            tape.param(params_, p + ".mlp.1.b")));
    Tensor y = tape.add_bias(tape.matmul(hidden, tape.param(params_, p + ".mlp.2.w")),
                             tape.param(params_, p + ".mlp.2.b"));
    y = tape.dropout(y, cfg_.dropout);
    return tape.layer_norm(tape.add(x, y), tape.param(params_, p + ".ln.g"),
                           tape.param(params_, p + ".ln.b"));
}

std::pair<Tensor, Tensor> PolicyNet::inter_layer(Tape& tape, const Tensor& xq,
                                                 const Tensor& xt,
                                                 const CrossGraphLinks& links,
                                                 int layer) const {
    auto cross = [&](const Tensor& from, const Tensor& to, const DenseMatrix& mask,
                     const std::string& prefix) {
        // from-side update: w1 * x_u + sum_v alpha_uv (w2 * x_v), masked to links
        Tensor q = tape.matmul(from, tape.param(params_, prefix + ".wq"));
        Tensor k = tape.matmul(to, tape.param(params_, prefix + ".wk"));
        Tensor value = tape.matmul(to, tape.param(params_, prefix + ".w2"));
        Tensor gathered = tape.multihead_attention(q, k, value, &mask, cfg_.heads);
        Tensor skip = tape.matmul(from, tape.param(params_, prefix + ".w1"));
        return tape.relu(tape.add(skip, gathered));
    };
    const std::string p = "enc.l" + std::to_string(layer) + ".inter";
    Tensor q_next = cross(xq, xt, links.query_to_target, p + ".q");
    Tensor t_next = cross(xt, xq, links.target_to_query, p + ".t");
    return {q_next, t_next};
}

PolicyNet::Encoded PolicyNet::encode(Tape& tape, const SearchState& state,
                                     EncodingCache& cache) const {
    const Graph& gq = state.pair().query;
    const Graph& gt = state.pair().target;

    std::vector<double> flag_q(gq.node_count(), 0.0), flag_t(gt.node_count(), 0.0);
    for (auto [u, v] : state.mapping().pairs()) {
        flag_q[u] = 1.0;
        flag_t[v] = 1.0;
    }

    Tensor xq = embed_graph(tape, gq, flag_q, cache.pos_features(gq), "q");
    Tensor xt = embed_graph(tape, gt, flag_t, cache.pos_features(gt), "t");

    const auto edges_q = gq.edges();
    const auto edges_t = gt.edges();
    CrossGraphLinks links = build_links(state);

    std::vector<Tensor> outs_q, outs_t;
    for (int l = 0; l < cfg_.layers; ++l) {
        Tensor iq = intra_layer(tape, xq, edges_q, l);
        Tensor it = intra_layer(tape, xt, edges_t, l);
        std::tie(xq, xt) = inter_layer(tape, iq, it, links, l);
        outs_q.push_back(xq);
        outs_t.push_back(xt);
    }

    Tensor jq = tape.add_bias(tape.matmul(tape.concat_cols(outs_q), tape.param(params_, "jk.w")),
                              tape.param(params_, "jk.b"));
    Tensor jt = tape.add_bias(tape.matmul(tape.concat_cols(outs_t), tape.param(params_, "jk.w")),
                              tape.param(params_, "jk.b"));
    return {jq, jt};
}

Tensor PolicyNet::action_distribution(Tape& tape, const SearchState& state,
                                      const std::vector<Action>& actions,
                                      EncodingCache& cache) const {
    if (actions.empty()) throw EmptyActionSet("no actions to score");
    const int u = state.next_query_node();
    std::vector<int> candidates;
    candidates.reserve(actions.size());
    for (const Action& a : actions) {
        if (a.query_node != u)
            throw IllegalAction("actions must all map the next query node");
        candidates.push_back(a.target_node);
    }

    Encoded enc = encode(tape, state, cache);

    Tensor pooled = tape.mean_rows(self_attention(tape, enc.query, "dec.attn", nullptr, nullptr));
    Tensor xu = tape.gather_rows(enc.query, {u});
    Tensor xv = tape.gather_rows(enc.target, candidates);

    Tensor interaction = tape.bilinear(xu, tape.param(params_, "dec.w3"), xv);
    Tensor stacked = tape.concat_cols(
        {tape.repeat_row(pooled, static_cast<int>(candidates.size())), interaction});

    Tensor hidden = tape.add_bias(tape.matmul(stacked, tape.param(params_, "head.1.w")),
                                  tape.param(params_, "head.1.b"));
    hidden = tape.batch_norm(hidden, tape.param(params_, "head.bn.g"),
                             tape.param(params_, "head.bn.b"), params_, "head.bn");
    hidden = tape.dropout(tape.relu(hidden), cfg_.dropout);
    Tensor logits = tape.add_bias(tape.matmul(hidden, tape.param(params_, "head.2.w")),
                                  tape.param(params_, "head.2.b"));
    return tape.softmax_rows(tape.transpose(logits));
}

std::vector<double> NeuralPolicy::scores(const SearchState& state,
                                         const std::vector<Action>& actions) const {
    Tape tape(false);
    Tensor probs = net_->action_distribution(tape, state, actions, *cache_);
    return probs.values();
}

}  // namespace asmatch
