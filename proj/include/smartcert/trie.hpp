#pragma once

#include <bit>
#include <memory>

#include "bytes.hpp"
#include "hash.hpp"

namespace smartcert {

class KeyAbsent : public std::runtime_error {
public:
    explicit KeyAbsent(const std::string& k) : std::runtime_error("key absent: " + k) {}
};

/// Proof that `key` maps to `value` under some root. The bitmap marks, per
/// level walking root to leaf, whether the sibling at that level differs from
/// the vacant-subtree digest; `siblings` carries exactly those digests in the
/// same order. Wire layout:
///   key (32) | value length (4, BE) | value | bitmap (32) | siblings (32 each)
struct InclusionProof {
    Digest key;
    Bytes value;
    std::array<uint8_t, 32> bitmap{};
    std::vector<Digest> siblings;

    bool bitmapBit(size_t i) const { return (bitmap[i >> 3] >> (7 - (i & 7))) & 1; }
    void setBitmapBit(size_t i) { bitmap[i >> 3] |= static_cast<uint8_t>(0x80u >> (i & 7)); }

    size_t popcount() const {
        size_t n = 0;
        for (uint8_t b : bitmap) n += std::popcount(b);
        return n;
    }

    Bytes serialize() const {
        ByteWriter w;
        w.raw(key);
        w.lp32(value);
        w.raw(bitmap.data(), bitmap.size());
        for (const Digest& s : siblings) w.raw(s);
        return w.take();
    }

    /// Consumes exactly one proof from the reader; throws DecodeError.
    static InclusionProof parse(ByteReader& r) {
        InclusionProof p;
        p.key = r.fixed<32>();
        p.value = r.lp32();
        Bytes bm = r.bytes(32);
        std::memcpy(p.bitmap.data(), bm.data(), 32);
        size_t n = p.popcount();
        p.siblings.reserve(n);
        for (size_t i = 0; i < n; i++) p.siblings.push_back(r.fixed<32>());
        return p;
    }

    static std::optional<InclusionProof> fromBytes(const Bytes& b) {
        try {
            ByteReader r(b);
            InclusionProof p = parse(r);
            r.expectDone();
            return p;
        } catch (const DecodeError&) {
            return std::nullopt;
        }
    }

    auto operator<=>(const InclusionProof&) const = default;
};

namespace trie_detail {

inline int bitAt(const Digest& k, size_t i) { return (k.b[i >> 3] >> (7 - (i & 7))) & 1; }

inline size_t firstDiffBit(const Digest& a, const Digest& b) {
    for (size_t byte = 0; byte < 32; byte++) {
        uint8_t x = static_cast<uint8_t>(a.b[byte] ^ b.b[byte]);
        if (x) return byte * 8 + static_cast<size_t>(std::countl_zero(x));
    }
    return 256;  // equal keys; callers never ask in that case
}

inline Digest combine(int bit, const Digest& onPath, const Digest& sibling) {
    Sha256 h;
    h.add(uint8_t{0x01});
    if (bit == 0)
        h.add(onPath).add(sibling);
    else
        h.add(sibling).add(onPath);
    return h.done();
}

inline Digest leafDigest(const Digest& key, const Bytes& value) {
    Digest vh = sha256(value);
    return Sha256().add(uint8_t{0x00}).add(key).add(vh).done();
}

/// Immutable node. A leaf owns a full key/value pair; a branch records the
/// bit index where its two subtrees first diverge, a representative key for
/// the shared prefix, and its subtree digest evaluated at that bit depth.
/// Single-child chains are never materialized: the digest of the skipped
/// levels is folded in on demand against the vacant ladder.
struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    bool leaf;
    Digest key;
    Bytes value;       // leaf only
    uint16_t depth;    // branch only
    NodePtr child[2];  // branch only, both always set
    Digest hash;       // leaf: bottom-level digest; branch: digest at `depth`
};

/// Digest of the subtree rooted at `atDepth` containing only this node.
inline Digest subtreeHash(const NodePtr& n, size_t atDepth) {
    if (!n) return emptyAt(256 - atDepth);
    Digest h = n->hash;
    size_t from = n->leaf ? 256 : n->depth;
    for (size_t d = from; d-- > atDepth;) h = combine(bitAt(n->key, d), h, emptyAt(255 - d));
    return h;
}

inline NodePtr makeLeaf(const Digest& key, Bytes value) {
    auto n = std::make_shared<Node>();
    n->leaf = true;
    n->key = key;
    n->hash = leafDigest(key, value);
    n->value = std::move(value);
    return n;
}

inline NodePtr makeBranch(size_t depth, NodePtr left, NodePtr right) {
    auto n = std::make_shared<Node>();
    n->leaf = false;
    n->depth = static_cast<uint16_t>(depth);
    n->key = left ? left->key : right->key;
    Digest l = subtreeHash(left, depth + 1);
    Digest r = subtreeHash(right, depth + 1);
    n->hash = Sha256().add(uint8_t{0x01}).add(l).add(r).done();
    n->child[0] = std::move(left);
    n->child[1] = std::move(right);
    return n;
}

inline NodePtr insert(const NodePtr& n, const Digest& key, const Bytes& value) {
    if (!n) return makeLeaf(key, value);
    if (n->leaf) {
        if (n->key == key) return makeLeaf(key, value);
        size_t b = firstDiffBit(n->key, key);
        NodePtr added = makeLeaf(key, value);
        if (bitAt(key, b))
            return makeBranch(b, n, added);
        return makeBranch(b, added, n);
    }
    size_t b = firstDiffBit(n->key, key);
    if (b < n->depth) {
        // diverges above this branch's split: the whole subtree becomes one side
        NodePtr added = makeLeaf(key, value);
        if (bitAt(key, b))
            return makeBranch(b, n, added);
        return makeBranch(b, added, n);
    }
    int i = bitAt(key, n->depth);
    NodePtr c = insert(n->child[i], key, value);
    if (i == 0) return makeBranch(n->depth, c, n->child[1]);
    return makeBranch(n->depth, n->child[0], c);
}

inline NodePtr erase(const NodePtr& n, const Digest& key) {
    if (!n) return nullptr;
    if (n->leaf) return n->key == key ? nullptr : n;
    if (firstDiffBit(n->key, key) < n->depth) return n;  // key not under this branch
    int i = bitAt(key, n->depth);
    NodePtr c = erase(n->child[i], key);
    if (c == n->child[i]) return n;
    if (!c) return n->child[1 - i];  // collapse: lone subtree keeps its own split depth
    if (i == 0) return makeBranch(n->depth, c, n->child[1]);
    return makeBranch(n->depth, n->child[0], c);
}

inline const Node* find(const NodePtr& root, const Digest& key) {
    const Node* n = root.get();
    while (n && !n->leaf) {
        if (firstDiffBit(n->key, key) < n->depth) return nullptr;
        n = n->child[bitAt(key, n->depth)].get();
    }
    if (n && n->key == key) return n;
    return nullptr;
}

}  // namespace trie_detail

/// Sparse Merkle trie over 256-bit keys (callers pre-hash their keys). Vacant
/// positions hash to a per-height ladder, a stored key hashes as
/// H(0x00 | key | H(value)) at the bottom level, and every interior level as
/// H(0x01 | left | right). Copies share structure and are safe to read
/// concurrently; mutation happens through a single owner.
class Trie {
public:
    Digest root() const {
        if (!cachedRoot_) cachedRoot_ = trie_detail::subtreeHash(root_, 0);
        return *cachedRoot_;
    }

    static Digest emptyRoot() { return emptyAt(256); }

    /// An empty value erases the key.
    void put(const Digest& key, const Bytes& value) {
        if (value.empty()) {
            erase(key);
            return;
        }
        if (!trie_detail::find(root_, key)) size_++;
        root_ = trie_detail::insert(root_, key, value);
        cachedRoot_.reset();
    }

    void erase(const Digest& key) {
        if (!trie_detail::find(root_, key)) return;
        root_ = trie_detail::erase(root_, key);
        size_--;
        cachedRoot_.reset();
    }

    std::optional<Bytes> get(const Digest& key) const {
        const trie_detail::Node* n = trie_detail::find(root_, key);
        if (!n) return std::nullopt;
        return n->value;
    }

    size_t size() const { return size_; }

    InclusionProof prove(const Digest& key) const {
        using namespace trie_detail;
        InclusionProof p;
        p.key = key;
        const NodePtr* cur = &root_;
        while (*cur && !(*cur)->leaf) {
            const Node* n = cur->get();
            if (firstDiffBit(n->key, key) < n->depth) throw KeyAbsent(key.hex());
            // levels above n->depth since the last branch have vacant
            // siblings and stay unmarked
            int i = bitAt(key, n->depth);
            p.setBitmapBit(n->depth);
            p.siblings.push_back(subtreeHash(n->child[1 - i], n->depth + 1));
            cur = &n->child[i];
        }
        const Node* leaf = cur->get();
        if (!leaf || leaf->key != key) throw KeyAbsent(key.hex());
        p.value = leaf->value;
        return p;
    }

    /// Pure check of a proof against a root; malformed input yields false,
    /// never a throw.
    static bool verify(const Digest& root, const InclusionProof& p) {
        using namespace trie_detail;
        if (p.value.empty()) return false;
        if (p.siblings.size() != p.popcount()) return false;
        Digest h = leafDigest(p.key, p.value);
        size_t idx = p.siblings.size();
        for (size_t d = 256; d-- > 0;) {
            const Digest& sib = p.bitmapBit(d) ? p.siblings[--idx] : emptyAt(255 - d);
            h = combine(bitAt(p.key, d), h, sib);
        }
        return h == root;
    }

private:
    trie_detail::NodePtr root_;
    size_t size_ = 0;
    mutable std::optional<Digest> cachedRoot_;
};

}  // namespace smartcert
