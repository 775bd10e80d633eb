#include <smartcert/trie.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>

using namespace smartcert;

namespace {

// ---------------------------------------------------------------------------
// Reference implementation: recursive split over a sorted entry list. Shares
// nothing with the library's incremental node structure; roots from both must
// agree bit for bit.

using Entry = std::pair<Digest, Bytes>;

int refBit(const Digest& k, size_t i) { return (k.b[i >> 3] >> (7 - (i & 7))) & 1; }

Digest refLeaf(const Digest& key, const Bytes& value) {
    Digest vh = sha256(value);
    return Sha256().add(uint8_t{0x00}).add(key).add(vh).done();
}

Digest refRec(const Entry* b, const Entry* e, size_t depth) {
    if (b == e) return emptyAt(256 - depth);
    if (depth == 256) return refLeaf(b->first, b->second);
    const Entry* mid = b;
    while (mid != e && refBit(mid->first, depth) == 0) mid++;
    Digest l = refRec(b, mid, depth + 1);
    Digest r = refRec(mid, e, depth + 1);
    return Sha256().add(uint8_t{0x01}).add(l).add(r).done();
}

Digest refRoot(std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.first.b < b.first.b; });
    return refRec(entries.data(), entries.data() + entries.size(), 0);
}

Bytes str(const char* s) {
    auto* p = reinterpret_cast<const uint8_t*>(s);
    return Bytes(p, p + strlen(s));
}

Digest hx(const char* s) { return *Digest::fromHex(s); }

// Frozen outputs of the reference implementation. These pin the hash domain
// tags (0x00 leaf, 0x01 interior, 0x02 vacant) and the bit order; any drift
// in either implementation trips these before the cross-checks run.
const Digest kEmpty0 = hx("dbc1b4c900ffe48d575b5da5c638040125f65db0fe3e24494b76ea986457d986");
const Digest kEmpty1 = hx("fc39420ec3a5cda3666578b55cce1d2cbf7f11bb1a4dc73b3bc28610bf869462");
const Digest kEmpty256 = hx("9b97517f25140762b9e187bae23a31ab78a4230354dece720bbbefcfce8de5a0");
const Digest kLeafGolden = hx("ba5d3d8be3689dbea9c1d327911cfe10d7662609cbb7b24c78c4f9246b802149");
const Digest kRoot3 = hx("e1ec64c3d1caf0a1c742406b2475662d5c531cce575587425a6a2551f980e81d");
const Digest kRoot2 = hx("34d48875a62ea9e901c04506e95749094cd58172c7c98ebc225e31d470cd1721");
const Digest kRoot1 = hx("fd6a293fcd4be77f3b79d2837db0aab6f5424d9cdb9f9b6bce9e68671cf3b7b3");

std::vector<Entry> fixedThree() {
    Digest k1{}, k2{};
    k1.b[31] = 0x01;
    k2.b[0] = 0x80;
    Digest k3 = sha256(std::string("k3"));
    return {{k1, str("a")}, {k2, str("bb")}, {k3, str("ccc")}};
}

Digest randKey(std::mt19937_64& rng) {
    Digest k;
    for (auto& b : k.b) b = static_cast<uint8_t>(rng());
    return k;
}

Bytes randValue(std::mt19937_64& rng, size_t maxLen = 80) {
    Bytes v(1 + rng() % maxLen);
    for (auto& b : v) b = static_cast<uint8_t>(rng());
    return v;
}

Trie buildTrie(const std::vector<Entry>& entries) {
    Trie t;
    for (const auto& [k, v] : entries) t.put(k, v);
    return t;
}

}  // namespace

TEST_CASE("vacant ladder and leaf digest match frozen reference") {
    CHECK(emptyAt(0) == kEmpty0);
    CHECK(emptyAt(1) == kEmpty1);
    CHECK(emptyAt(256) == kEmpty256);
    CHECK(Sha256().add(uint8_t{0x01}).add(kEmpty0).add(kEmpty0).done() == kEmpty1);

    Digest kv;
    kv.b.fill(0x11);
    CHECK(refLeaf(kv, str("v")) == kLeafGolden);

    CHECK(Trie().root() == kEmpty256);
    CHECK(Trie::emptyRoot() == kEmpty256);
}

TEST_CASE("roots match the reference on fixed and random corpora") {
    auto three = fixedThree();
    CHECK(refRoot(three) == kRoot3);

    CHECK(buildTrie({}).root() == kEmpty256);
    CHECK(buildTrie({three[0]}).root() == kRoot1);
    CHECK(buildTrie(three).root() == kRoot3);

    std::mt19937_64 rng(7);
    std::vector<Entry> entries;
    for (int i = 0; i < 257; i++) entries.push_back({randKey(rng), randValue(rng)});
    CHECK(buildTrie(entries).root() == refRoot(entries));
}

TEST_CASE("root is insertion-order independent") {
    auto entries = fixedThree();
    Digest k4 = sha256(std::string("k4"));
    entries.push_back({k4, str("dddd")});
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.first.b < b.first.b; });
    Digest want = refRoot(entries);

    std::vector<Digest> seen;
    do {
        Digest r = buildTrie(entries).root();
        CHECK(r == want);
        if (std::find(seen.begin(), seen.end(), r) == seen.end()) seen.push_back(r);
    } while (std::next_permutation(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.first.b < b.first.b;
    }));
    CHECK(seen.size() == 1);

    // larger corpus, shuffled
    std::mt19937_64 rng(21);
    std::vector<Entry> big;
    for (int i = 0; i < 100; i++) big.push_back({randKey(rng), randValue(rng)});
    Digest bigRoot = refRoot(big);
    for (int s = 0; s < 5; s++) {
        std::shuffle(big.begin(), big.end(), rng);
        CHECK(buildTrie(big).root() == bigRoot);
    }
}

TEST_CASE("overwrite and erase reduce to rebuilt tries") {
    auto three = fixedThree();
    Trie t = buildTrie(three);

    SECTION("erase middle key equals trie built without it") {
        t.erase(three[1].first);
        CHECK(t.root() == kRoot2);
        CHECK(t.size() == 2);
        CHECK_FALSE(t.get(three[1].first).has_value());
    }

    SECTION("empty value acts as erase") {
        t.put(three[1].first, {});
        CHECK(t.root() == kRoot2);
        CHECK(t.size() == 2);
    }

    SECTION("overwrite changes only that key") {
        t.put(three[0].first, str("zz"));
        auto changed = three;
        changed[0].second = str("zz");
        CHECK(t.root() == refRoot(changed));
        CHECK(t.get(three[0].first) == str("zz"));
    }

    SECTION("erasing everything returns to the vacant root") {
        for (const auto& [k, v] : three) t.erase(k);
        CHECK(t.root() == kEmpty256);
        CHECK(t.size() == 0);
    }

    SECTION("erasing an absent key is a no-op") {
        Digest absent = sha256(std::string("absent"));
        t.erase(absent);
        CHECK(t.root() == kRoot3);
        CHECK(t.size() == 3);
    }
}

TEST_CASE("random interleaved put/erase tracks a map-backed rebuild") {
    std::mt19937_64 rng(99);
    Trie t;
    std::map<Digest, Bytes, decltype([](const Digest& a, const Digest& b) { return a.b < b.b; })> model;
    std::vector<Digest> keys;
    for (int i = 0; i < 40; i++) keys.push_back(randKey(rng));

    for (int step = 0; step < 400; step++) {
        const Digest& k = keys[rng() % keys.size()];
        if (rng() % 3 == 0) {
            t.erase(k);
            model.erase(k);
        } else {
            Bytes v = randValue(rng);
            t.put(k, v);
            model[k] = v;
        }
    }
    std::vector<Entry> entries(model.begin(), model.end());
    CHECK(t.root() == refRoot(entries));
    CHECK(t.size() == entries.size());
    for (const auto& [k, v] : entries) CHECK(t.get(k) == v);
}

TEST_CASE("copies share structure without write-through") {
    Trie a = buildTrie(fixedThree());
    Trie b = a;
    b.put(sha256(std::string("extra")), str("x"));
    CHECK(a.root() == kRoot3);
    CHECK(b.root() != kRoot3);
    CHECK(a.size() == 3);
    CHECK(b.size() == 4);
}

TEST_CASE("proofs verify and carry the stored value") {
    std::mt19937_64 rng(13);
    std::vector<Entry> entries;
    for (int i = 0; i < 300; i++) entries.push_back({randKey(rng), randValue(rng)});
    Trie t = buildTrie(entries);
    Digest root = t.root();

    size_t maxSibs = 0, totalSibs = 0;
    for (const auto& [k, v] : entries) {
        InclusionProof p = t.prove(k);
        CHECK(p.value == v);
        CHECK(p.siblings.size() == p.popcount());
        CHECK(p.siblings.size() <= 256);
        CHECK(Trie::verify(root, p));
        maxSibs = std::max(maxSibs, p.siblings.size());
        totalSibs += p.siblings.size();
    }
    // random keys branch near the top: sibling cost stays logarithmic
    CHECK(maxSibs <= 64);
    CHECK(totalSibs / entries.size() <= 32);
}

TEST_CASE("proving an absent key throws") {
    Trie t = buildTrie(fixedThree());
    CHECK_THROWS_AS(t.prove(sha256(std::string("nope"))), KeyAbsent);
    CHECK_THROWS_AS(Trie().prove(sha256(std::string("nope"))), KeyAbsent);
}

TEST_CASE("proof serialization round-trips byte-exactly") {
    Trie t = buildTrie(fixedThree());
    for (const auto& [k, v] : fixedThree()) {
        InclusionProof p = t.prove(k);
        Bytes wire = p.serialize();
        auto back = InclusionProof::fromBytes(wire);
        REQUIRE(back.has_value());
        CHECK(*back == p);
        CHECK(back->serialize() == wire);
    }
    CHECK_FALSE(InclusionProof::fromBytes(Bytes{1, 2, 3}).has_value());
    Bytes wire = t.prove(fixedThree()[0].first).serialize();
    wire.push_back(0);  // trailing garbage
    CHECK_FALSE(InclusionProof::fromBytes(wire).has_value());
}

TEST_CASE("every single-bit corruption of a proof is rejected") {
    Trie t = buildTrie(fixedThree());
    Digest root = t.root();
    InclusionProof p = t.prove(fixedThree()[2].first);
    REQUIRE(Trie::verify(root, p));
    Bytes wire = p.serialize();

    // exhaustive: every bit of the wire form (covers key, value length,
    // value, bitmap, and siblings)
    for (size_t bit = 0; bit < wire.size() * 8; bit++) {
        Bytes mut = wire;
        mut[bit / 8] ^= static_cast<uint8_t>(0x80u >> (bit % 8));
        auto parsed = InclusionProof::fromBytes(mut);
        if (!parsed) continue;  // length/bitmap flips break framing outright
        CHECK_FALSE(Trie::verify(root, *parsed));
    }

    // and every bit of the root
    for (size_t bit = 0; bit < 256; bit++) {
        Digest mutRoot = root;
        mutRoot.b[bit / 8] ^= static_cast<uint8_t>(0x80u >> (bit % 8));
        CHECK_FALSE(Trie::verify(mutRoot, p));
    }

    // empty values are never stored, so a proof claiming one is invalid
    InclusionProof pe = p;
    pe.value.clear();
    CHECK_FALSE(Trie::verify(root, pe));

    // sibling list length must match the bitmap exactly
    InclusionProof ps = p;
    ps.siblings.push_back(Digest{});
    CHECK_FALSE(Trie::verify(root, ps));
    ps = p;
    if (!ps.siblings.empty()) {
        ps.siblings.pop_back();
        CHECK_FALSE(Trie::verify(root, ps));
    }
}

TEST_CASE("a proof does not survive a root from changed state") {
    auto three = fixedThree();
    Trie t = buildTrie(three);
    InclusionProof p = t.prove(three[0].first);
    Digest oldRoot = t.root();
    t.put(sha256(std::string("new-key")), str("new"));
    CHECK(Trie::verify(oldRoot, p));        // still fine against the old root
    CHECK_FALSE(Trie::verify(t.root(), p));  // state moved on
}
