#include "kgsentry/graph_store.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace kgs {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

}  // namespace

EntityId TripleStore::intern_entity(const std::string& label,
                                    const std::string& etype) {
    if (label.empty()) throw std::invalid_argument("empty entity label");
    auto it = entity_index_.find(label);
    if (it != entity_index_.end()) {
        const EntityId id{it->second};
        if (entity_types_[id.value] != etype) {
            throw TypeConflict("entity '" + label + "' already interned as '" +
                               entity_types_[id.value] + "', got '" + etype +
                               "'");
        }
        return id;
    }
    check_mutable();
    const auto id = static_cast<std::uint32_t>(entity_labels_.size());
    entity_labels_.push_back(label);
    entity_types_.push_back(etype);
    entity_index_.emplace(label, id);
    return EntityId{id};
}

RelationId TripleStore::intern_relation(const std::string& label) {
    if (label.empty()) throw std::invalid_argument("empty relation label");
    auto it = relation_index_.find(label);
    if (it != relation_index_.end()) return RelationId{it->second};
    check_mutable();
    const auto id = static_cast<std::uint32_t>(relation_labels_.size());
    relation_labels_.push_back(label);
    relation_index_.emplace(label, id);
    return RelationId{id};
}

std::optional<EntityId> TripleStore::find_entity(const std::string& label) const {
    auto it = entity_index_.find(label);
    if (it == entity_index_.end()) return std::nullopt;
    return EntityId{it->second};
}

std::optional<RelationId> TripleStore::find_relation(
    const std::string& label) const {
    auto it = relation_index_.find(label);
    if (it == relation_index_.end()) return std::nullopt;
    return RelationId{it->second};
}

const std::string& TripleStore::entity_label(EntityId id) const {
    check_entity(id);
    return entity_labels_[id.value];
}

const std::string& TripleStore::entity_type(EntityId id) const {
    check_entity(id);
    return entity_types_[id.value];
}

const std::string& TripleStore::relation_label(RelationId id) const {
    check_relation(id);
    return relation_labels_[id.value];
}

std::uint64_t TripleStore::add_triple(Triple t, std::uint64_t count) {
    if (count == 0) throw std::invalid_argument("triple count must be positive");
    check_mutable();
    check_entity(t.s);
    check_relation(t.p);
    check_entity(t.o);
    total_count_ += count;
    auto it = triple_index_.find(t);
    if (it != triple_index_.end()) {
        counts_[it->second] += count;
        return counts_[it->second];
    }
    triple_index_.emplace(t, triples_.size());
    triples_.push_back(t);
    counts_.push_back(count);
    return count;
}

bool TripleStore::contains(Triple t) const {
    return triple_index_.find(t) != triple_index_.end();
}

std::uint64_t TripleStore::count(Triple t) const {
    auto it = triple_index_.find(t);
    return it == triple_index_.end() ? 0 : counts_[it->second];
}

std::uint64_t TripleStore::max_count() const {
    std::uint64_t m = 0;
    for (const auto c : counts_) m = std::max(m, c);
    return m;
}

Triple TripleStore::negative_sample(Triple t, Slot slot, Rng& rng,
                                    int max_retries) const {
    check_entity(t.s);
    check_relation(t.p);
    check_entity(t.o);
    const std::size_t domain =
        slot == Slot::Relation ? relation_count() : entity_count();
    if (domain < 2) {
        throw Saturated("no alternative values exist for the corrupted slot");
    }
    const std::uint32_t current = slot == Slot::Subject    ? t.s.value
                                  : slot == Slot::Relation ? t.p.value
                                                           : t.o.value;
    for (int attempt = 0; attempt < max_retries; ++attempt) {
        // Uniform over the domain minus the current value.
        auto alt = static_cast<std::uint32_t>(rng.below(domain - 1));
        if (alt >= current) ++alt;
        Triple candidate = t;
        switch (slot) {
            case Slot::Subject: candidate.s = EntityId{alt}; break;
            case Slot::Relation: candidate.p = RelationId{alt}; break;
            case Slot::Object: candidate.o = EntityId{alt}; break;
        }
        if (!contains(candidate)) return candidate;
    }
    throw Saturated("no absent triple found within retry bound");
}

void TripleStore::serialize(std::ostream& out) const {
    out << "# kgsentry graph v1\n";
    for (std::size_t i = 0; i < entity_labels_.size(); ++i) {
        out << "@entity\t" << entity_labels_[i] << '\t' << entity_types_[i]
            << '\n';
    }
    for (const auto& label : relation_labels_) {
        out << "@relation\t" << label << '\n';
    }
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        const Triple& t = triples_[i];
        out << entity_labels_[t.s.value] << '\t' << relation_labels_[t.p.value]
            << '\t' << entity_labels_[t.o.value] << '\t' << counts_[i] << '\n';
    }
}

TripleStore TripleStore::deserialize(std::istream& in) {
    TripleStore store;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_tabs(line);
        if (fields[0] == "@entity") {
            if (fields.size() != 3) {
                throw ParseError(line_no, "@entity expects 2 fields");
            }
            try {
                store.intern_entity(fields[1], fields[2]);
            } catch (const std::invalid_argument& e) {
                throw ParseError(line_no, e.what());
            }
            continue;
        }
        if (fields[0] == "@relation") {
            if (fields.size() != 2) {
                throw ParseError(line_no, "@relation expects 1 field");
            }
            try {
                store.intern_relation(fields[1]);
            } catch (const std::invalid_argument& e) {
                throw ParseError(line_no, e.what());
            }
            continue;
        }
        if (fields.size() != 4) {
            throw ParseError(line_no, "triple row expects 4 tab-separated "
                                      "fields, got " +
                                          std::to_string(fields.size()));
        }
        const auto s = store.find_entity(fields[0]);
        const auto p = store.find_relation(fields[1]);
        const auto o = store.find_entity(fields[2]);
        if (!s || !o) {
            throw ParseError(line_no, "triple references an entity missing "
                                      "from the @entity header block");
        }
        if (!p) {
            throw ParseError(line_no, "triple references a relation missing "
                                      "from the @relation header block");
        }
        std::uint64_t count = 0;
        const auto& f = fields[3];
        const auto [ptr, ec] =
            std::from_chars(f.data(), f.data() + f.size(), count);
        if (ec != std::errc{} || ptr != f.data() + f.size() || count == 0) {
            throw ParseError(line_no, "bad count '" + f + "'");
        }
        store.add_triple(Triple{*s, *p, *o}, count);
    }
    return store;
}

std::uint64_t TripleStore::dictionary_hash() const {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](const std::string& s, char sep) {
        for (const char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        h ^= static_cast<unsigned char>(sep);
        h *= 1099511628211ULL;
    };
    for (std::size_t i = 0; i < entity_labels_.size(); ++i) {
        mix(entity_labels_[i], '\x1f');
        mix(entity_types_[i], '\x1e');
    }
    for (const auto& label : relation_labels_) mix(label, '\x1d');
    return h;
}

void TripleStore::check_entity(EntityId id) const {
    if (id.value >= entity_labels_.size()) {
        throw UnknownId("entity id " + std::to_string(id.value) +
                        " not interned in this store");
    }
}

void TripleStore::check_relation(RelationId id) const {
    if (id.value >= relation_labels_.size()) {
        throw UnknownId("relation id " + std::to_string(id.value) +
                        " not interned in this store");
    }
}

void TripleStore::check_mutable() const {
    if (frozen_) throw std::logic_error("store is frozen");
}

}  // namespace kgs
