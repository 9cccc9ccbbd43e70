#pragma once
// Interned, counted triple store. Entities and relations are dictionary
// encoded into dense ids; triples are kept as a multiset (triple -> count)
// with a stable insertion order so that iteration and sampling are
// deterministic.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgsentry/errors.hpp"
#include "kgsentry/rng.hpp"

namespace kgs {

struct EntityId {
    std::uint32_t value = 0;
    friend bool operator==(EntityId, EntityId) = default;
};

struct RelationId {
    std::uint32_t value = 0;
    friend bool operator==(RelationId, RelationId) = default;
};

struct Triple {
    EntityId s;
    RelationId p;
    EntityId o;
    friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const {
        std::uint64_t x = (static_cast<std::uint64_t>(t.s.value) << 40) ^
                          (static_cast<std::uint64_t>(t.p.value) << 20) ^
                          t.o.value;
        return static_cast<std::size_t>(splitmix64(x));
    }
};

enum class Slot { Subject, Relation, Object };

class TripleStore {
public:
    // Returns the existing id when the label is already known; the entity
    // type must then match. Throws TypeConflict otherwise.
    EntityId intern_entity(const std::string& label, const std::string& etype);
    RelationId intern_relation(const std::string& label);

    std::optional<EntityId> find_entity(const std::string& label) const;
    std::optional<RelationId> find_relation(const std::string& label) const;

    const std::string& entity_label(EntityId id) const;
    const std::string& entity_type(EntityId id) const;
    const std::string& relation_label(RelationId id) const;

    std::size_t entity_count() const { return entity_labels_.size(); }
    std::size_t relation_count() const { return relation_labels_.size(); }

    // Increments the observation count and returns the new count.
    std::uint64_t add_triple(Triple t, std::uint64_t count = 1);

    bool contains(Triple t) const;
    std::uint64_t count(Triple t) const;

    std::size_t distinct_triple_count() const { return triples_.size(); }
    std::uint64_t total_count() const { return total_count_; }
    std::uint64_t max_count() const;

    // Distinct triples in insertion order; counts_ aligned by index.
    const std::vector<Triple>& triples() const { return triples_; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }

    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }

    // Corrupts one slot of `t` with a uniformly drawn alternative until the
    // result is absent from the store. Throws Saturated after max_retries.
    Triple negative_sample(Triple t, Slot slot, Rng& rng,
                           int max_retries = 100) const;

    // Line-oriented TSV: an @entity/@relation header block followed by
    // `s \t p \t o \t count` rows. `#` lines and blank lines are ignored.
    void serialize(std::ostream& out) const;
    static TripleStore deserialize(std::istream& in);

    // FNV-1a over both dictionaries in id order; checkpoints bind to this.
    std::uint64_t dictionary_hash() const;

private:
    void check_entity(EntityId id) const;
    void check_relation(RelationId id) const;
    void check_mutable() const;

    std::vector<std::string> entity_labels_;
    std::vector<std::string> entity_types_;
    std::unordered_map<std::string, std::uint32_t> entity_index_;

    std::vector<std::string> relation_labels_;
    std::unordered_map<std::string, std::uint32_t> relation_index_;

    std::vector<Triple> triples_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<Triple, std::size_t, TripleHash> triple_index_;
    std::uint64_t total_count_ = 0;

    bool frozen_ = false;
};

}  // namespace kgs
