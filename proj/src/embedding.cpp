#include "kgsentry/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace kgs {

namespace {

// Sparse per-step gradient: a handful of entity vectors and relation
// matrices, found-or-appended by id. Buffers are reused across steps.
struct BlockGrad {
    std::vector<std::uint32_t> e_ids;
    std::vector<double> e_grads;  // e_ids.size() x rank
    std::vector<std::uint32_t> r_ids;
    std::vector<double> r_grads;  // r_ids.size() x rank^2

    void clear() {
        e_ids.clear();
        e_grads.clear();
        r_ids.clear();
        r_grads.clear();
    }

    double* entity_slot(std::uint32_t id, std::size_t rank) {
        for (std::size_t i = 0; i < e_ids.size(); ++i) {
            if (e_ids[i] == id) return e_grads.data() + i * rank;
        }
        e_ids.push_back(id);
        e_grads.resize(e_grads.size() + rank, 0.0);
        return e_grads.data() + (e_ids.size() - 1) * rank;
    }

    double* relation_slot(std::uint32_t id, std::size_t rank2) {
        for (std::size_t i = 0; i < r_ids.size(); ++i) {
            if (r_ids[i] == id) return r_grads.data() + i * rank2;
        }
        r_ids.push_back(id);
        r_grads.resize(r_grads.size() + rank2, 0.0);
        return r_grads.data() + (r_ids.size() - 1) * rank2;
    }
};

double score_raw(const double* es, const double* rp, const double* eo,
                 std::size_t rank) {
    double theta = 0.0;
    for (std::size_t a = 0; a < rank; ++a) {
        double row = 0.0;
        const double* rp_row = rp + a * rank;
        for (std::size_t b = 0; b < rank; ++b) row += rp_row[b] * eo[b];
        theta += es[a] * row;
    }
    return theta;
}

// Adds coeff * d(theta)/d(param) for one triple into the block gradient.
void accumulate_theta_grad(const ModelParams& params, Triple t, double coeff,
                           BlockGrad& grad) {
    const std::size_t rank = params.rank();
    const double* es = params.entity(t.s.value).data();
    const double* eo = params.entity(t.o.value).data();
    const double* rp = params.relation(t.p.value).data();

    double* ds = grad.entity_slot(t.s.value, rank);
    for (std::size_t a = 0; a < rank; ++a) {
        double row = 0.0;
        const double* rp_row = rp + a * rank;
        for (std::size_t b = 0; b < rank; ++b) row += rp_row[b] * eo[b];
        ds[a] += coeff * row;
    }
    double* do_ = grad.entity_slot(t.o.value, rank);
    for (std::size_t b = 0; b < rank; ++b) {
        double col = 0.0;
        for (std::size_t a = 0; a < rank; ++a) col += es[a] * rp[a * rank + b];
        do_[b] += coeff * col;
    }
    double* dr = grad.relation_slot(t.p.value, rank * rank);
    for (std::size_t a = 0; a < rank; ++a) {
        const double c = coeff * es[a];
        for (std::size_t b = 0; b < rank; ++b) dr[a * rank + b] += c * eo[b];
    }
}

// Weight-decay term, applied once per block the batch touched.
void add_l2(const ModelParams& params, double l2, BlockGrad& grad) {
    if (l2 == 0.0) return;
    const std::size_t rank = params.rank();
    for (std::size_t i = 0; i < grad.e_ids.size(); ++i) {
        const double* p = params.entity(grad.e_ids[i]).data();
        double* g = grad.e_grads.data() + i * rank;
        for (std::size_t r = 0; r < rank; ++r) g[r] += 2.0 * l2 * p[r];
    }
    const std::size_t rank2 = rank * rank;
    for (std::size_t i = 0; i < grad.r_ids.size(); ++i) {
        const double* p = params.relation(grad.r_ids[i]).data();
        double* g = grad.r_grads.data() + i * rank2;
        for (std::size_t r = 0; r < rank2; ++r) g[r] += 2.0 * l2 * p[r];
    }
}

void accumulate_mse(const ModelParams& params,
                    std::span<const LabeledTriple> batch, double l2,
                    BlockGrad& grad) {
    for (const auto& item : batch) {
        const double theta = score(params, item.t);
        accumulate_theta_grad(params, item.t, -2.0 * (item.target - theta),
                              grad);
    }
    add_l2(params, l2, grad);
}

void apply_step(ModelParams& params, const BlockGrad& grad, double lr) {
    const std::size_t rank = params.rank();
    for (std::size_t i = 0; i < grad.e_ids.size(); ++i) {
        double* p = params.entity(grad.e_ids[i]).data();
        const double* g = grad.e_grads.data() + i * rank;
        for (std::size_t r = 0; r < rank; ++r) p[r] -= lr * g[r];
    }
    const std::size_t rank2 = rank * rank;
    for (std::size_t i = 0; i < grad.r_ids.size(); ++i) {
        double* p = params.relation(grad.r_ids[i]).data();
        const double* g = grad.r_grads.data() + i * rank2;
        for (std::size_t r = 0; r < rank2; ++r) p[r] -= lr * g[r];
    }
}

void check_bound(const ModelParams& params, Triple t) {
    if (t.s.value >= params.entity_count() ||
        t.o.value >= params.entity_count() ||
        t.p.value >= params.relation_count()) {
        throw OutOfBounds("triple ids exceed model dimensions");
    }
}

// One dream triple; scratch holds per-entity scores to avoid reallocation.
Triple sample_one_dream(const ModelParams& params, const TripleStore& store,
                        Rng& rng, std::vector<double>& scratch) {
    const std::size_t rank = params.rank();
    const std::size_t n = params.entity_count();
    const Triple base = store.triples()[rng.below(store.triples().size())];
    const bool corrupt_subject = rng.below(2) == 0;
    const double* rp = params.relation(base.p.value).data();

    scratch.assign(n, 0.0);
    std::vector<double> context(rank, 0.0);
    if (corrupt_subject) {
        // context = R_p e_o, theta_c = e_c . context
        const double* eo = params.entity(base.o.value).data();
        for (std::size_t a = 0; a < rank; ++a) {
            double row = 0.0;
            const double* rp_row = rp + a * rank;
            for (std::size_t b = 0; b < rank; ++b) row += rp_row[b] * eo[b];
            context[a] = row;
        }
    } else {
        // context = e_s^T R_p
        const double* es = params.entity(base.s.value).data();
        for (std::size_t b = 0; b < rank; ++b) {
            double col = 0.0;
            for (std::size_t a = 0; a < rank; ++a) col += es[a] * rp[a * rank + b];
            context[b] = col;
        }
    }
    double max_theta = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
        const double* ec = params.entity(c).data();
        double theta = 0.0;
        for (std::size_t r = 0; r < rank; ++r) theta += ec[r] * context[r];
        scratch[c] = theta;
        max_theta = std::max(max_theta, theta);
    }
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        scratch[c] = std::exp(scratch[c] - max_theta);
        total += scratch[c];
    }
    const double u = rng.uniform() * total;
    double cum = 0.0;
    std::size_t pick = n - 1;
    for (std::size_t c = 0; c < n; ++c) {
        cum += scratch[c];
        if (u < cum) {
            pick = c;
            break;
        }
    }
    Triple dream = base;
    if (corrupt_subject) {
        dream.s = EntityId{static_cast<std::uint32_t>(pick)};
    } else {
        dream.o = EntityId{static_cast<std::uint32_t>(pick)};
    }
    return dream;
}

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

constexpr std::uint64_t kCheckpointMagic = 0x314b504b43534748ULL;

}  // namespace

void TrainConfig::validate() const {
    if (rank < 1) throw std::invalid_argument("rank must be >= 1");
    if (learning_rate < 0.0) throw std::invalid_argument("learning rate must be >= 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (negatives_per_positive < 1) {
        throw std::invalid_argument("negatives per positive must be >= 1");
    }
    if (init_scale < 0.0) throw std::invalid_argument("init scale must be >= 0");
    if (l2 < 0.0) throw std::invalid_argument("l2 weight must be >= 0");
}

ModelParams::ModelParams(std::size_t n_entities, std::size_t n_relations,
                         std::size_t rank)
    : n_entities_(n_entities),
      n_relations_(n_relations),
      rank_(rank),
      entities_(n_entities * rank, 0.0),
      relations_(n_relations * rank * rank, 0.0) {
    if (n_entities < 1 || n_relations < 1 || rank < 1) {
        throw std::invalid_argument("model dimensions must be >= 1");
    }
}

ModelParams init_params(std::size_t n_entities, std::size_t n_relations,
                        std::size_t rank, double init_scale,
                        std::uint64_t seed) {
    ModelParams params(n_entities, n_relations, rank);
    Rng rng(derive_seed(seed, 0x696e6974));
    for (auto& v : params.entity_data()) v = init_scale * rng.gaussian();
    for (auto& v : params.relation_data()) v = init_scale * rng.gaussian();
    return params;
}

double score(const ModelParams& params, Triple t) {
    check_bound(params, t);
    return score_raw(params.entity(t.s.value).data(),
                     params.relation(t.p.value).data(),
                     params.entity(t.o.value).data(), params.rank());
}

double probability(double theta) {
    if (theta >= 0.0) {
        return 1.0 / (1.0 + std::exp(-theta));
    }
    const double e = std::exp(theta);
    return e / (1.0 + e);
}

double mse_loss(const ModelParams& params, std::span<const LabeledTriple> batch,
                double l2) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    double loss = 0.0;
    for (const auto& item : batch) {
        const double r = item.target - score(params, item.t);
        loss += r * r;
    }
    if (l2 > 0.0) {
        // Squared norm of each touched block, counted once.
        std::vector<std::uint32_t> e_seen, r_seen;
        auto see = [](std::vector<std::uint32_t>& seen, std::uint32_t id) {
            if (std::find(seen.begin(), seen.end(), id) == seen.end()) {
                seen.push_back(id);
                return true;
            }
            return false;
        };
        double sq = 0.0;
        for (const auto& item : batch) {
            if (see(e_seen, item.t.s.value)) {
                for (const double v : params.entity(item.t.s.value)) sq += v * v;
            }
            if (see(e_seen, item.t.o.value)) {
                for (const double v : params.entity(item.t.o.value)) sq += v * v;
            }
            if (see(r_seen, item.t.p.value)) {
                for (const double v : params.relation(item.t.p.value)) sq += v * v;
            }
        }
        loss += l2 * sq;
    }
    return loss;
}

GradientBuffer grad_mse(const ModelParams& params,
                        std::span<const LabeledTriple> batch, double l2) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    for (const auto& item : batch) check_bound(params, item.t);
    BlockGrad grad;
    accumulate_mse(params, batch, l2, grad);
    GradientBuffer dense;
    dense.entities.assign(params.entity_data().size(), 0.0);
    dense.relations.assign(params.relation_data().size(), 0.0);
    const std::size_t rank = params.rank();
    for (std::size_t i = 0; i < grad.e_ids.size(); ++i) {
        std::copy_n(grad.e_grads.data() + i * rank, rank,
                    dense.entities.data() + grad.e_ids[i] * rank);
    }
    for (std::size_t i = 0; i < grad.r_ids.size(); ++i) {
        std::copy_n(grad.r_grads.data() + i * rank * rank, rank * rank,
                    dense.relations.data() + grad.r_ids[i] * rank * rank);
    }
    return dense;
}

ModelParams train_mse(const TripleStore& store, const TrainConfig& config) {
    config.validate();
    if (store.distinct_triple_count() == 0) {
        throw std::invalid_argument("cannot train on an empty store");
    }
    ModelParams params = init_params(store.entity_count(),
                                     store.relation_count(), config.rank,
                                     config.init_scale, config.seed);
    params.dict_hash = store.dictionary_hash();
    Rng rng(derive_seed(config.seed, 0x6d7365));

    std::vector<std::size_t> order(store.distinct_triple_count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<LabeledTriple> batch;
    BlockGrad grad;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (const std::size_t idx : order) {
            const Triple positive = store.triples()[idx];
            batch.clear();
            batch.push_back({positive, 1.0});
            for (std::size_t k = 0; k < config.negatives_per_positive; ++k) {
                const Slot slot =
                    rng.below(2) == 0 ? Slot::Subject : Slot::Object;
                batch.push_back({store.negative_sample(positive, slot, rng), 0.0});
            }
            grad.clear();
            accumulate_mse(params, batch, config.l2, grad);
            apply_step(params, grad, config.learning_rate);
        }
    }
    return params;
}

double energy(const ModelParams& params, const TripleStore& store) {
    double e = 0.0;
    const auto& triples = store.triples();
    const auto& counts = store.counts();
    for (std::size_t i = 0; i < triples.size(); ++i) {
        e -= static_cast<double>(counts[i]) * score(params, triples[i]);
    }
    return e;
}

std::vector<Triple> sample_model_triples(const ModelParams& params,
                                         const TripleStore& store,
                                         std::size_t k, Rng& rng) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (store.distinct_triple_count() == 0) {
        throw std::invalid_argument("store has no triples to dream from");
    }
    std::vector<Triple> dreams;
    dreams.reserve(k);
    std::vector<double> scratch;
    for (std::size_t i = 0; i < k; ++i) {
        dreams.push_back(sample_one_dream(params, store, rng, scratch));
    }
    return dreams;
}

ModelParams train_energy(const TripleStore& store, const TrainConfig& config) {
    config.validate();
    if (store.distinct_triple_count() == 0) {
        throw std::invalid_argument("cannot train on an empty store");
    }
    ModelParams params = init_params(store.entity_count(),
                                     store.relation_count(), config.rank,
                                     config.init_scale, config.seed);
    params.dict_hash = store.dictionary_hash();
    Rng rng(derive_seed(config.seed, 0x656e6572));

    const double max_count = static_cast<double>(store.max_count());
    std::vector<std::size_t> order(store.distinct_triple_count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> scratch;
    BlockGrad grad;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += config.batch_size) {
            const std::size_t stop =
                std::min(order.size(), start + config.batch_size);

            // Wake: raise theta of observed triples, weighted by
            // normalized multiplicity.
            grad.clear();
            for (std::size_t i = start; i < stop; ++i) {
                const std::size_t idx = order[i];
                const double w =
                    static_cast<double>(store.counts()[idx]) / max_count;
                accumulate_theta_grad(params, store.triples()[idx], -w, grad);
            }
            add_l2(params, config.l2, grad);
            apply_step(params, grad, config.learning_rate);

            // Sleep: lower theta of an equal-size batch of dreams.
            grad.clear();
            for (std::size_t i = start; i < stop; ++i) {
                const Triple dream =
                    sample_one_dream(params, store, rng, scratch);
                accumulate_theta_grad(params, dream, 1.0, grad);
            }
            add_l2(params, config.l2, grad);
            apply_step(params, grad, config.learning_rate);
        }
    }
    return params;
}

ModelParams train(const TripleStore& store, const TrainConfig& config) {
    return config.kind == TrainConfig::Kind::Mse ? train_mse(store, config)
                                                 : train_energy(store, config);
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    write_u64(out, kCheckpointMagic);
    write_u64(out, 1);  // version
    write_u64(out, params.entity_count());
    write_u64(out, params.relation_count());
    write_u64(out, params.rank());
    write_u64(out, params.dict_hash);
    out.write(reinterpret_cast<const char*>(params.entity_data().data()),
              static_cast<std::streamsize>(params.entity_data().size() *
                                           sizeof(double)));
    out.write(reinterpret_cast<const char*>(params.relation_data().data()),
              static_cast<std::streamsize>(params.relation_data().size() *
                                           sizeof(double)));
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path,
                            std::uint64_t expected_dict_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    if (read_u64(in) != kCheckpointMagic) {
        throw IoError("not a kgsentry checkpoint: " + path);
    }
    if (read_u64(in) != 1) throw IoError("unsupported checkpoint version");
    const std::uint64_t n = read_u64(in);
    const std::uint64_t m = read_u64(in);
    const std::uint64_t rank = read_u64(in);
    const std::uint64_t hash = read_u64(in);
    if (hash != expected_dict_hash) {
        throw DictMismatch("checkpoint was trained against a different "
                           "entity/relation dictionary");
    }
    ModelParams params(n, m, rank);
    params.dict_hash = hash;
    in.read(reinterpret_cast<char*>(params.entity_data().data()),
            static_cast<std::streamsize>(params.entity_data().size() *
                                         sizeof(double)));
    in.read(reinterpret_cast<char*>(params.relation_data().data()),
            static_cast<std::streamsize>(params.relation_data().size() *
                                         sizeof(double)));
    if (!in) throw IoError("truncated checkpoint: " + path);
    return params;
}

}  // namespace kgs
