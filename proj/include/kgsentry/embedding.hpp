#pragma once
// Bilinear graph embeddings: one R-vector per entity, one dense RxR matrix
// per relation. A triple (s, p, o) is scored as theta = e_s^T R_p e_o and
// turned into a probability with the logistic function.
//
// Two trainers share this parameterization:
//  - train_mse: reconstruction of the binary adjacency tensor against
//    uniformly corrupted negatives (targets 1/0, squared error).
//  - train_energy: wake-sleep updates on the energy -sum(count * theta);
//    observed triples are pushed up, model-sampled "dream" triples are
//    pushed down. The partition function cancels and is never computed.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kgsentry/graph_store.hpp"
#include "kgsentry/rng.hpp"

namespace kgs {

struct TrainConfig {
    enum class Kind { Mse, Energy };

    std::size_t rank = 32;
    double learning_rate = 0.05;
    std::size_t epochs = 200;
    std::size_t batch_size = 128;
    std::size_t negatives_per_positive = 4;
    double init_scale = 0.1;
    std::uint64_t seed = 42;
    Kind kind = Kind::Energy;
    double l2 = 1e-4;

    void validate() const;
};

class ModelParams {
public:
    ModelParams(std::size_t n_entities, std::size_t n_relations,
                std::size_t rank);

    std::size_t entity_count() const { return n_entities_; }
    std::size_t relation_count() const { return n_relations_; }
    std::size_t rank() const { return rank_; }

    std::span<double> entity(std::size_t j) {
        return {entities_.data() + j * rank_, rank_};
    }
    std::span<const double> entity(std::size_t j) const {
        return {entities_.data() + j * rank_, rank_};
    }
    std::span<double> relation(std::size_t k) {
        return {relations_.data() + k * rank_ * rank_, rank_ * rank_};
    }
    std::span<const double> relation(std::size_t k) const {
        return {relations_.data() + k * rank_ * rank_, rank_ * rank_};
    }

    std::vector<double>& entity_data() { return entities_; }
    const std::vector<double>& entity_data() const { return entities_; }
    std::vector<double>& relation_data() { return relations_; }
    const std::vector<double>& relation_data() const { return relations_; }

    // Hash of the dictionaries this model was trained against.
    std::uint64_t dict_hash = 0;

private:
    std::size_t n_entities_;
    std::size_t n_relations_;
    std::size_t rank_;
    std::vector<double> entities_;
    std::vector<double> relations_;
};

// Gaussian init, mean 0, sd init_scale, deterministic per seed.
ModelParams init_params(std::size_t n_entities, std::size_t n_relations,
                        std::size_t rank, double init_scale,
                        std::uint64_t seed);

double score(const ModelParams& params, Triple t);

// Logistic function; strictly increasing, sigma(x) + sigma(-x) = 1.
double probability(double theta);

struct LabeledTriple {
    Triple t;
    double target = 1.0;
};

// Sum of squared residuals plus l2 * squared norm of the parameter blocks
// the batch touches (each touched block counted once).
double mse_loss(const ModelParams& params, std::span<const LabeledTriple> batch,
                double l2);

// Dense gradient with the same layout as ModelParams.
struct GradientBuffer {
    std::vector<double> entities;
    std::vector<double> relations;
};
GradientBuffer grad_mse(const ModelParams& params,
                        std::span<const LabeledTriple> batch, double l2);

ModelParams train_mse(const TripleStore& store, const TrainConfig& config);

// E = -sum over stored triples of count * theta.
double energy(const ModelParams& params, const TripleStore& store);

// Draws k dream triples: uniform stored positive, uniform slot in
// {subject, object}, replacement entity from softmax(theta) over all
// entities at temperature 1.
std::vector<Triple> sample_model_triples(const ModelParams& params,
                                         const TripleStore& store,
                                         std::size_t k, Rng& rng);

ModelParams train_energy(const TripleStore& store, const TrainConfig& config);

ModelParams train(const TripleStore& store, const TrainConfig& config);

// Versioned binary checkpoint. Loading verifies the dictionary hash of the
// target store and throws DictMismatch when it differs.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path,
                            std::uint64_t expected_dict_hash);

}  // namespace kgs
