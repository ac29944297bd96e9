#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tree.hpp"

namespace bhv {

// Parse failure with the 0-based byte offset into the original text.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

  private:
    std::size_t offset_;
};

// An ordered list of trees sharing one taxon set (leaf order taken from the
// first tree's left-to-right appearance).
struct NewickDocument {
    TaxonSetPtr taxa;
    std::vector<Tree> trees;
};

namespace detail {

// Reads "subtree := leaf | '(' subtree (',' subtree)+ ')' [label] [':' length]"
// and accumulates (leaf-mask, branch-length) edges bottom-up.
class NewickParser {
  public:
    explicit NewickParser(std::string_view text) : text_(text) {}

    NewickDocument parse() {
        NewickDocument doc;
        std::vector<std::vector<std::string>> leaf_orders;
        std::vector<RawTree> raws;
        skip_space();
        while (pos_ < text_.size()) {
            raws.push_back(parse_tree());
            skip_space();
        }
        if (raws.empty()) throw ParseError("no trees in input", pos_);

        doc.taxa = make_taxa(raws.front().leaf_order);
        for (std::size_t t = 0; t < raws.size(); ++t) {
            const RawTree& raw = raws[t];
            if (t > 0) {
                if (raw.leaf_order.size() != doc.taxa->size())
                    throw ParseError("mismatched leaf sets across trees", raw.start);
                for (const auto& name : raw.leaf_order)
                    if (!doc.taxa->has(name))
                        throw ParseError("mismatched leaf sets across trees: " + name, raw.start);
            }
            doc.trees.push_back(build_tree(raw, doc.taxa));
        }
        return doc;
    }

  private:
    struct RawEdge {
        std::uint64_t mask;   // leaves below the edge, in this tree's own order
        double length;
        std::size_t at;       // offset, for error reports
    };
    struct RawTree {
        std::vector<std::string> leaf_order;
        std::map<std::string, std::size_t> leaf_index;
        std::vector<RawEdge> edges;       // every child edge, root's children included
        std::vector<std::uint64_t> root_children;
        std::size_t start = 0;
    };

    RawTree parse_tree() {
        RawTree raw;
        raw.start = pos_;
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != '(')
            throw ParseError("expected '(' to start a tree", pos_);
        std::uint64_t root_mask = parse_inner(raw, /*is_root=*/true);
        (void)root_mask;
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ':') {  // root length carries no split; ignored
            ++pos_;
            skip_space();
            parse_number();
        }
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != ';')
            throw ParseError("expected ';' after tree", pos_);
        ++pos_;
        if (raw.leaf_order.size() < 3)
            throw ParseError("tree needs at least 3 leaves", raw.start);
        return raw;
    }

    // Parses '(' subtree (',' subtree)+ ')' [label]; returns the leaf mask.
    // The optional ':' length of this group is consumed by the caller.
    std::uint64_t parse_inner(RawTree& raw, bool is_root) {
        ++pos_;  // consume '('
        std::uint64_t mask = 0;
        int children = 0;
        while (true) {
            mask |= parse_subtree(raw, is_root);
            ++children;
            skip_space();
            if (pos_ >= text_.size())
                throw ParseError("unbalanced parentheses", pos_);
            if (text_[pos_] == ',') {
                ++pos_;
                continue;
            }
            if (text_[pos_] == ')') {
                ++pos_;
                break;
            }
            throw ParseError("unbalanced parentheses", pos_);
        }
        if (children < 2) throw ParseError("internal node needs at least 2 children", pos_);
        skip_space();
        if (pos_ < text_.size() && is_label_start(text_[pos_])) parse_label();  // internal label, ignored
        return mask;
    }

    // One child of an internal node: leaf or nested group, plus optional length.
    std::uint64_t parse_subtree(RawTree& raw, bool parent_is_root) {
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
        std::uint64_t mask;
        if (text_[pos_] == '(') {
            mask = parse_inner(raw, /*is_root=*/false);
        } else if (is_label_start(text_[pos_])) {
            std::size_t at = pos_;
            std::string name = parse_label();
            if (raw.leaf_index.count(name))
                throw ParseError("duplicate leaf label: " + name, at);
            std::size_t idx = raw.leaf_order.size();
            if (idx >= 64) throw ParseError("more than 64 leaves", at);
            raw.leaf_index.emplace(name, idx);
            raw.leaf_order.push_back(name);
            mask = std::uint64_t{1} << idx;
        } else {
            throw ParseError("expected leaf label or '('", pos_);
        }
        double len = 1.0;  // missing branch lengths default to 1
        std::size_t len_at = pos_;
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ':') {
            ++pos_;
            skip_space();
            len_at = pos_;
            len = parse_number();
            if (len < 0) throw ParseError("negative branch length", len_at);
        }
        raw.edges.push_back({mask, len, len_at});
        if (parent_is_root) raw.root_children.push_back(mask);
        return mask;
    }

    std::string parse_label() {
        if (text_[pos_] == '\'') {
            ++pos_;
            std::string out;
            while (pos_ < text_.size()) {
                if (text_[pos_] == '\'') {
                    if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '\'') {
                        out += '\'';
                        pos_ += 2;
                        continue;
                    }
                    ++pos_;
                    return out;
                }
                out += text_[pos_++];
            }
            throw ParseError("unterminated quoted label", pos_);
        }
        std::string out;
        while (pos_ < text_.size() && !is_delim(text_[pos_]) &&
               !std::isspace(static_cast<unsigned char>(text_[pos_])))
            out += text_[pos_++];
        return out;
    }

    double parse_number() {
        const char* begin = text_.data() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) throw ParseError("expected a branch length", pos_);
        pos_ += static_cast<std::size_t>(end - begin);
        return v;
    }

    static bool is_delim(char c) {
        return c == '(' || c == ')' || c == ',' || c == ':' || c == ';';
    }
    static bool is_label_start(char c) {
        return !is_delim(c) && c != '#' && !std::isspace(static_cast<unsigned char>(c));
    }

    // Whitespace and '#'-to-end-of-line comments separate tokens.
    void skip_space() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    // Turns the raw edge list into splits over the document's shared taxa.
    // A degree-2 root is suppressed by merging its two edges into one.
    static Tree build_tree(const RawTree& raw, const TaxonSetPtr& taxa) {
        const std::size_t n = taxa->size();
        // Map this tree's private leaf numbering onto the document order.
        std::vector<std::size_t> remap(raw.leaf_order.size());
        for (std::size_t i = 0; i < raw.leaf_order.size(); ++i)
            remap[i] = taxa->index_of(raw.leaf_order[i]);
        auto remap_mask = [&](std::uint64_t m) {
            std::uint64_t out = 0;
            for (std::size_t i = 0; i < raw.leaf_order.size(); ++i)
                if ((m >> i) & 1u) out |= std::uint64_t{1} << remap[i];
            return out;
        };

        std::vector<RawEdge> edges = raw.edges;
        if (raw.root_children.size() == 2) {
            // Rooted input: the root's two edges describe the same split; merge
            // them into a single edge with the summed length.
            std::uint64_t keep = raw.root_children[0];
            std::uint64_t drop = raw.root_children[1];
            double extra = 0;
            std::vector<RawEdge> kept;
            for (const RawEdge& e : edges) {
                if (e.mask == drop)
                    extra += e.length;
                else
                    kept.push_back(e);
            }
            for (RawEdge& e : kept)
                if (e.mask == keep) e.length += extra;
            edges = std::move(kept);
        }

        std::map<Split, double> interior;
        std::vector<double> pendants(n, 0.0);
        const std::uint64_t full_local =
            raw.leaf_order.size() == 64 ? ~std::uint64_t{0}
                                        : (std::uint64_t{1} << raw.leaf_order.size()) - 1;
        for (const RawEdge& e : edges) {
            if (e.mask == full_local) continue;  // whole-tree edge carries no split
            std::uint64_t m = remap_mask(e.mask);
            if (std::popcount(e.mask) == 1) {
                std::size_t leaf = static_cast<std::size_t>(std::countr_zero(m));
                pendants[leaf] += e.length;
            } else {
                Split s(m, taxa);
                // Parallel edges from a suppressed root merge by addition.
                interior[s] += e.length;
            }
        }
        std::map<Split, double> cleaned;
        for (auto& [s, w] : interior) {
            if (s.interior())
                cleaned.emplace(s, w);
            else  // a merged root edge can collapse onto a pendant split
                pendants[static_cast<std::size_t>(std::countr_zero(
                    std::popcount(s.side()) == 1 ? s.side() : s.other_side()))] += w;
        }
        return Tree(taxa, std::move(cleaned), std::move(pendants));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

inline std::string format_weight(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string quote_label_if_needed(const std::string& label) {
    bool needs = false;
    for (char c : label)
        if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';' || c == '\'' ||
            c == '[' || c == ']' || c == '#' || std::isspace(static_cast<unsigned char>(c)))
            needs = true;
    if (!needs) return label;
    std::string out = "'";
    for (char c : label) {
        out += c;
        if (c == '\'') out += '\'';
    }
    out += '\'';
    return out;
}

}  // namespace detail

inline NewickDocument parse_newick(std::string_view text) {
    return detail::NewickParser(text).parse();
}

// Serializes T so that re-parsing yields the same splits and weights. The
// canonical sides (never containing leaf 0) form a laminar family, so they
// nest into a rooted layout with leaf 0's node as the root.
inline std::string write_newick(const Tree& t) {
    const TaxonSetPtr& taxa = t.taxa();
    const std::size_t n = taxa->size();

    struct Node {
        std::uint64_t mask;
        double length;
        std::vector<std::size_t> children;  // indices into nodes
        std::vector<std::size_t> leaves;    // direct leaf children
    };
    std::vector<Node> nodes;
    for (const auto& [s, w] : t.interior_weights())
        nodes.push_back({s.side(), w, {}, {}});
    // Sort ascending by popcount so each node attaches to the smallest
    // enclosing side (its parent in the laminar family).
    std::vector<std::size_t> order(nodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::popcount(nodes[a].mask) < std::popcount(nodes[b].mask) ||
               (std::popcount(nodes[a].mask) == std::popcount(nodes[b].mask) &&
                nodes[a].mask < nodes[b].mask);
    });
    std::vector<std::size_t> parent(nodes.size(), SIZE_MAX);
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        std::size_t i = order[oi];
        // Smallest strict superset among the remaining sides.
        std::size_t best = SIZE_MAX;
        int best_count = 1 << 30;
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            if (j == i) continue;
            if ((nodes[i].mask & ~nodes[j].mask) == 0 && nodes[i].mask != nodes[j].mask) {
                int c = std::popcount(nodes[j].mask);
                if (c < best_count) {
                    best_count = c;
                    best = j;
                }
            }
        }
        parent[i] = best;
    }
    std::vector<std::size_t> root_nodes;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (parent[i] == SIZE_MAX)
            root_nodes.push_back(i);
        else
            nodes[parent[i]].children.push_back(i);
    }
    // Each leaf hangs off the smallest side containing it, or off the root.
    std::vector<std::size_t> root_leaves;
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        std::size_t best = SIZE_MAX;
        int best_count = 1 << 30;
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            if ((nodes[j].mask >> leaf) & 1u) {
                int c = std::popcount(nodes[j].mask);
                if (c < best_count) {
                    best_count = c;
                    best = j;
                }
            }
        }
        if (best == SIZE_MAX)
            root_leaves.push_back(leaf);
        else
            nodes[best].leaves.push_back(leaf);
    }

    auto leaf_str = [&](std::size_t leaf) {
        return detail::quote_label_if_needed(taxa->label(leaf)) + ":" +
               detail::format_weight(t.pendant_weights()[leaf]);
    };
    // Children print leaves first (taxon order), then nested groups.
    std::function<std::string(std::size_t)> node_str = [&](std::size_t i) -> std::string {
        std::string out = "(";
        bool first = true;
        for (std::size_t leaf : nodes[i].leaves) {
            if (!first) out += ',';
            first = false;
            out += leaf_str(leaf);
        }
        for (std::size_t c : nodes[i].children) {
            if (!first) out += ',';
            first = false;
            out += node_str(c);
        }
        out += "):" + detail::format_weight(nodes[i].length);
        return out;
    };

    std::string out = "(";
    bool first = true;
    for (std::size_t leaf : root_leaves) {
        if (!first) out += ',';
        first = false;
        out += leaf_str(leaf);
    }
    for (std::size_t i : root_nodes) {
        if (!first) out += ',';
        first = false;
        out += node_str(i);
    }
    out += ");";
    return out;
}

}  // namespace bhv
