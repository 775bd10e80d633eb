#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include "smartcert/client.hpp"

using namespace smartcert;

namespace {

struct Actor {
    KeyPair keys;
    Address addr;
};

Actor makeActor(const SigScheme& scheme, uint64_t seed, const std::string& label) {
    Actor a;
    auto rng = seededRng(seed, label);
    a.keys = scheme.generate(rng);
    a.addr = a.keys.address();
    return a;
}

struct Net {
    ChainConfig cfg;
    std::vector<Actor> cas;
    Actor owner;
    KeyPair tls;
    Chain chain;
};

Net makeNet(size_t nCas) {
    ChainConfig cfg;
    cfg.schemeName = "testsig";
    cfg.blockInterval = 10;
    cfg.epoch = 100;
    cfg.maxStale = 300;
    const SigScheme& scheme = schemeByName(cfg.schemeName);
    std::vector<Actor> cas;
    for (size_t i = 0; i < nCas; i++) {
        cas.push_back(makeActor(scheme, 100 + i, "ca"));
        cfg.trustedCaPubs.push_back(cas.back().keys.pub);
    }
    Actor owner = makeActor(scheme, 7, "owner");
    auto rng = seededRng(8, "tls");
    KeyPair tls = scheme.generate(rng);
    Chain chain = makeChain(cfg);
    return Net{std::move(cfg), std::move(cas), std::move(owner), std::move(tls), std::move(chain)};
}

Receipt run(Chain& c, Transaction tx, uint64_t mineAt) {
    Digest id = c.enqueueUnchecked(std::move(tx));
    c.mineBlock(mineAt);
    auto r = c.receiptOf(id);
    REQUIRE(r);
    return *r;
}

Transaction callTx(Chain& c, const Actor& a, const Address& target, const std::string& method,
                   Bytes args) {
    Transaction tx;
    tx.senderPubKey = a.keys.pub;
    tx.nonce = c.nonceOf(a.addr);
    tx.kind = Transaction::Kind::Call;
    tx.target = target;
    tx.method = method;
    tx.args = std::move(args);
    tx.signature = c.scheme().sign(a.keys.priv, tx.signedBytes());
    return tx;
}

Address createCert(Net& n, const std::string& name, std::vector<size_t> caIdx, uint64_t mineAt,
                   const std::string& templateId = kCertTemplateId) {
    std::vector<Address> cas;
    for (size_t i : caIdx) cas.push_back(n.cas[i].addr);
    Transaction tx;
    tx.senderPubKey = n.owner.keys.pub;
    tx.nonce = n.chain.nonceOf(n.owner.addr);
    tx.kind = Transaction::Kind::Create;
    tx.templateId = templateId;
    tx.args = buildCertInitArgs(name, policyContractAddress(), {n.tls.pub}, cas);
    tx.signature = n.chain.scheme().sign(n.owner.keys.priv, tx.signedBytes());
    Address expect = Chain::contractAddress(n.owner.addr, tx.nonce);
    Receipt r = run(n.chain, std::move(tx), mineAt);
    REQUIRE(r.status == Receipt::Status::Ok);
    return expect;
}

/// Validation proof a CA would have captured from the real TLS key, built
/// directly so most tests need no handshake server.
Bytes probeArgs(Net& n, size_t caIdx, uint64_t now) {
    auto rng = seededRng(now * 31 + caIdx, "probe");
    Digest cliRnd = makeCliRnd(n.cas[caIdx].addr, n.chain.headHash());
    Bytes srvRnd = makeSrvRnd(now, rng);
    Bytes params = makeDhParams(rng);
    Bytes sig = n.chain.scheme().sign(n.tls.priv, validationMessage(cliRnd, srvRnd, params));
    return buildCertUpdateArgs(cliRnd, srvRnd, params, sig);
}

void honestUpdate(Net& n, const Address& cert, size_t caIdx, uint64_t mineAt) {
    Bytes args = probeArgs(n, caIdx, mineAt);
    Receipt r = run(n.chain, callTx(n.chain, n.cas[caIdx], cert, "update", std::move(args)), mineAt);
    REQUIRE(r.status == Receipt::Status::Ok);
}

uint64_t word(const Chain& c, const Address& a, const std::string& label) {
    auto v = c.storageValue(a, label);
    REQUIRE(v);
    return wordValue(*v);
}

/// Store seeded at genesis and synced to the chain head.
HeaderStore storeFor(const Chain& c, uint64_t horizon = 1u << 30) {
    HeaderStore s(horizon);
    s.seed(c.headerAt(0));
    for (uint64_t b = 1; b < c.sealedCount(); b++) s.append(c.headerAt(b));
    return s;
}

TrustAnchors anchorsFor(const Net& n) { return TrustAnchors{certCodeHash(), n.cfg.maxStale}; }

void dropSlots(SmartCertCertificate& cert, const std::string& prefix) {
    std::erase_if(cert.slots,
                  [&](const auto& s) { return s.first.compare(0, prefix.size(), prefix) == 0; });
}

ConnectOutcome pipeConnect(HandshakeServer& server, const std::string& name,
                           const SigScheme& scheme, uint64_t now, const HeaderStore& store,
                           const TrustAnchors& anchors, std::mt19937_64& rng) {
    auto [cli, srv] = PipeStream::makePair();
    std::thread t([&server, s = std::move(srv)]() mutable {
        try {
            server.serve(*s);
        } catch (const HandshakeError&) {
        }
    });
    ConnectOutcome out = clientConnect(*cli, name, scheme, now, store, anchors, rng);
    t.join();
    return out;
}

}  // namespace

TEST_CASE("an assembled certificate verifies end to end") {
    Net n = makeNet(2);
    Address cert = createCert(n, "shop.example", {0, 1}, 10);
    honestUpdate(n, cert, 0, 20);

    HeaderStore store = storeFor(n.chain);
    TrustAnchors anchors = anchorsFor(n);
    SmartCertCertificate bundle = assembleCertificate(n.chain, cert);
    CHECK(bundle.anchorNumber == n.chain.head().number);

    VerifyResult v = verifyCert("shop.example", bundle, 25, store, anchors);
    REQUIRE(v.verdict == Verdict::Ok);
    CHECK(v.ok());
    CHECK(v.st.name == "shop.example");
    REQUIRE(v.st.pks.size() == 1);
    CHECK(v.st.pks[0] == n.tls.pub);
    CHECK(v.st.created == 10);
    CHECK(v.st.updated == 20);
    CHECK_FALSE(v.st.revoked);
    CHECK(v.st.valid);

    SECTION("the wire form round-trips") {
        Bytes wire = bundle.serialize();
        auto back = SmartCertCertificate::fromBytes(wire);
        REQUIRE(back);
        CHECK(back->serialize() == wire);
        CHECK(verifyCertBytes("shop.example", wire, 25, store, anchors).verdict == Verdict::Ok);
    }

    SECTION("an older anchor still verifies while its header is held") {
        n.chain.mineBlock(30);
        n.chain.mineBlock(40);
        HeaderStore longer = storeFor(n.chain);
        // The bundle still points at the old block; its header is in the
        // window, so the old state root remains checkable.
        CHECK(verifyCert("shop.example", bundle, 45, longer, anchors).verdict == Verdict::Ok);
    }
}

TEST_CASE("each rejection reports its own reason") {
    Net n = makeNet(2);
    Address cert = createCert(n, "shop.example", {0, 1}, 10);
    honestUpdate(n, cert, 0, 20);
    HeaderStore store = storeFor(n.chain);
    TrustAnchors anchors = anchorsFor(n);
    SmartCertCertificate good = assembleCertificate(n.chain, cert);
    REQUIRE(verifyCert("shop.example", good, 25, store, anchors).verdict == Verdict::Ok);

    SECTION("an anchor outside the header window is unknown") {
        SmartCertCertificate c = good;
        c.anchorNumber = n.chain.head().number + 50;
        CHECK(verifyCert("shop.example", c, 25, store, anchors).verdict == Verdict::UnknownRoot);
    }

    SECTION("a pruned anchor is unknown") {
        // A horizon of 25 seconds against 10-second blocks keeps only the
        // freshest few headers; the early anchor falls out of the window.
        SmartCertCertificate early = good;
        for (uint64_t t = 40; t <= 100; t += 10) n.chain.mineBlock(t);
        HeaderStore tight(25);
        tight.seed(n.chain.headerAt(0));
        for (uint64_t b = 1; b < n.chain.sealedCount(); b++) tight.append(n.chain.headerAt(b));
        REQUIRE(tight.byNumber(early.anchorNumber) == std::nullopt);
        CHECK(verifyCert("shop.example", early, 101, tight, anchors).verdict ==
              Verdict::UnknownRoot);
        // Reassembled at the head it verifies again.
        SmartCertCertificate fresh = assembleCertificate(n.chain, cert);
        CHECK(verifyCert("shop.example", fresh, 101, tight, anchors).verdict == Verdict::Ok);
    }

    SECTION("a tampered account proof is inconsistent") {
        SmartCertCertificate c = good;
        c.accountProof.value[0] ^= 1;
        CHECK(verifyCert("shop.example", c, 25, store, anchors).verdict ==
              Verdict::ProofInconsistent);
    }

    SECTION("an account proof for a different address is inconsistent") {
        SmartCertCertificate c = good;
        c.accountProof = n.chain.accountProof(policyContractAddress()).proof;
        CHECK(verifyCert("shop.example", c, 25, store, anchors).verdict ==
              Verdict::ProofInconsistent);
    }

    SECTION("a claimed address that does not match the proof is inconsistent") {
        SmartCertCertificate c = good;
        c.addr[3] ^= 0xff;
        CHECK(verifyCert("shop.example", c, 25, store, anchors).verdict ==
              Verdict::ProofInconsistent);
    }

    SECTION("a proven value that is not an account record is inconsistent") {
        // Hand-built state: the key for the address holds junk too short to
        // be an account record, with a header minted to match.
        Address odd = good.addr;
        Trie state;
        state.put(sha256(odd.toBytes()), Bytes{1, 2, 3});
        BlockHeader h;
        h.number = 0;
        h.timestamp = 5;
        h.stateRoot = state.root();
        HeaderStore tiny(1u << 30);
        tiny.seed(h);
        SmartCertCertificate c;
        c.addr = odd;
        c.anchorNumber = 0;
        c.accountProof = state.prove(sha256(odd.toBytes()));
        CHECK(verifyCert("shop.example", c, 25, tiny, anchors).verdict ==
              Verdict::ProofInconsistent);
    }

    SECTION("a contract from a different template is rejected by code hash") {
        Address other = createCert(n, "alt.example", {0, 1}, 30, kCertAltTemplateId);
        HeaderStore s2 = storeFor(n.chain);
        SmartCertCertificate c = assembleCertificate(n.chain, other);
        CHECK(verifyCert("alt.example", c, 35, s2, anchors).verdict == Verdict::BadCode);
    }

    SECTION("a tampered storage proof is rejected") {
        SmartCertCertificate c = good;
        for (auto& [label, proof] : c.slots)
            if (label == "updated") proof.value = beWord(9999);
        CHECK(verifyCert("shop.example", c, 25, store, anchors).verdict ==
              Verdict::BadStorageProof);
    }

    SECTION("a proof presented under the wrong label is rejected") {
        SmartCertCertificate c = good;
        InclusionProof *created = nullptr, *updated = nullptr;
        for (auto& [label, proof] : c.slots) {
            if (label == "created") created = &proof;
            if (label == "updated") updated = &proof;
        }
        REQUIRE((created && updated));
        std::swap(*created, *updated);
        CHECK(verifyCert("shop.example", c, 25, store, anchors).verdict ==
              Verdict::BadStorageProof);
    }

    SECTION("the wrong host name is rejected after the proofs pass") {
        VerifyResult v = verifyCert("other.example", good, 25, store, anchors);
        CHECK(v.verdict == Verdict::NameMismatch);
        // The snapshot still decodes, so the caller can see what the
        // certificate was actually for.
        CHECK(v.st.name == "shop.example");
    }

    SECTION("a revoked certificate is invalid") {
        Receipt r = run(n.chain, callTx(n.chain, n.cas[0], cert, "revoke", {}), 30);
        REQUIRE(r.status == Receipt::Status::Ok);
        REQUIRE(word(n.chain, cert, "revoked") == 1);
        HeaderStore s2 = storeFor(n.chain);
        SmartCertCertificate c = assembleCertificate(n.chain, cert);
        VerifyResult v = verifyCert("shop.example", c, 35, s2, anchors);
        CHECK(v.verdict == Verdict::Invalid);
        CHECK(v.st.revoked);
    }

    SECTION("staleness cuts over exactly one interval past the update") {
        CHECK(verifyCert("shop.example", good, 20 + anchors.maxStale - 1, store, anchors).verdict ==
              Verdict::Ok);
        CHECK(verifyCert("shop.example", good, 20 + anchors.maxStale, store, anchors).verdict ==
              Verdict::Ok);
        CHECK(verifyCert("shop.example", good, 20 + anchors.maxStale + 1, store, anchors).verdict ==
              Verdict::Stale);
    }

    SECTION("a certificate no CA ever validated reads as stale") {
        Address raw = createCert(n, "new.example", {0, 1}, 30);
        HeaderStore s2 = storeFor(n.chain);
        SmartCertCertificate c = assembleCertificate(n.chain, raw);
        // Never updated, so the update stamp is zero and only the first
        // staleness interval after time zero reads fresh.
        VerifyResult early = verifyCert("new.example", c, anchors.maxStale, s2, anchors);
        CHECK(early.verdict == Verdict::Ok);
        VerifyResult late = verifyCert("new.example", c, anchors.maxStale + 1, s2, anchors);
        CHECK(late.verdict == Verdict::Stale);
        CHECK(late.st.updated == 0);
    }

    SECTION("truncated byte strings fail to decode") {
        Bytes wire = good.serialize();
        wire.resize(wire.size() - 3);
        CHECK(verifyCertBytes("shop.example", wire, 25, store, anchors).verdict ==
              Verdict::DecodeError);
        CHECK(verifyCertBytes("shop.example", {}, 25, store, anchors).verdict ==
              Verdict::DecodeError);
    }

    SECTION("a bundle with missing slots fails to decode") {
        SmartCertCertificate c = good;
        dropSlots(c, "updated");
        CHECK(verifyCert("shop.example", c, 25, store, anchors).verdict == Verdict::DecodeError);
    }

    SECTION("earlier checks win when several would fire") {
        // Wrong code hash and wrong name at once: the code check comes first.
        Address other = createCert(n, "alt.example", {0, 1}, 30, kCertAltTemplateId);
        HeaderStore s2 = storeFor(n.chain);
        SmartCertCertificate c = assembleCertificate(n.chain, other);
        CHECK(verifyCert("zzz.example", c, 35, s2, anchors).verdict == Verdict::BadCode);
        // An unknown anchor beats everything.
        c.anchorNumber = 900;
        CHECK(verifyCert("zzz.example", c, 35, s2, anchors).verdict == Verdict::UnknownRoot);
    }
}

TEST_CASE("withholding name chunks cannot shorten the name") {
    Net n = makeNet(2);
    // Long enough to span two storage chunks.
    std::string name = "a-rather-long-subdomain-label.shop-division.example";
    REQUIRE(name.size() > 32);
    Address cert = createCert(n, name, {0, 1}, 10);
    honestUpdate(n, cert, 0, 20);
    HeaderStore store = storeFor(n.chain);
    TrustAnchors anchors = anchorsFor(n);
    SmartCertCertificate good = assembleCertificate(n.chain, cert);
    REQUIRE(verifyCert(name, good, 25, store, anchors).verdict == Verdict::Ok);

    // Serving only the first chunk leaves every remaining proof valid, so
    // the storage checks pass; the name hash is what catches the cut.
    SmartCertCertificate cut = good;
    dropSlots(cut, "nameRaw:1");
    CHECK(verifyCert(name.substr(0, 32), cut, 25, store, anchors).verdict == Verdict::DecodeError);

    // Same for dropping the name entirely and keeping only its hash.
    SmartCertCertificate bare = good;
    dropSlots(bare, "nameRaw");
    CHECK(verifyCert("", bare, 25, store, anchors).verdict == Verdict::DecodeError);
}

TEST_CASE("snapshot decoding rejects malformed slot values") {
    auto slot = [](const std::string& label, Bytes v) {
        InclusionProof p;
        p.value = std::move(v);
        return std::pair<std::string, InclusionProof>(label, std::move(p));
    };
    std::string name = "x.example";

    SmartCertCertificate c;
    c.slots.push_back(slot("name", sha256(name).toBytes()));
    c.slots.push_back(slot("nameRaw:0", Bytes(name.begin(), name.end())));
    c.slots.push_back(slot("pkCount", beWord(1)));
    c.slots.push_back(slot("pk:0:0", Bytes{9, 9, 9}));
    c.slots.push_back(slot("created", beWord(10)));
    c.slots.push_back(slot("updated", beWord(20)));
    c.slots.push_back(slot("revoked", beWord(0)));
    c.slots.push_back(slot("valid", beWord(1)));
    REQUIRE_NOTHROW(client_detail::decodeSnapshot(c));

    SECTION("flag slots must be zero or one") {
        for (auto& [label, proof] : c.slots)
            if (label == "valid") proof.value = beWord(2);
        CHECK_THROWS_AS(client_detail::decodeSnapshot(c), DecodeError);
    }
    SECTION("counter slots must be full words") {
        for (auto& [label, proof] : c.slots)
            if (label == "pkCount") proof.value = Bytes{1, 0, 0};
        CHECK_THROWS_AS(client_detail::decodeSnapshot(c), DecodeError);
    }
    SECTION("a key count without key bytes is rejected") {
        dropSlots(c, "pk:0");
        CHECK_THROWS_AS(client_detail::decodeSnapshot(c), DecodeError);
    }
    SECTION("the name hash slot must be a digest") {
        for (auto& [label, proof] : c.slots)
            if (label == "name") proof.value = Bytes{1, 2};
        CHECK_THROWS_AS(client_detail::decodeSnapshot(c), DecodeError);
    }
}

TEST_CASE("a tampered header is caught when the next one arrives") {
    Net n = makeNet(1);
    for (uint64_t t = 10; t <= 60; t += 10) n.chain.mineBlock(t);

    HeaderStore store(1u << 30);
    store.seed(n.chain.headerAt(0));
    store.append(n.chain.headerAt(1));
    store.append(n.chain.headerAt(2));

    // The forged header still names the right parent, so on its own it
    // slips in; the following honest header no longer links to it.
    BlockHeader forged = n.chain.headerAt(3);
    forged.timestamp += 1;
    store.append(forged);
    CHECK_THROWS_AS(store.append(n.chain.headerAt(4)), BrokenChain);

    SECTION("a reseeded store accepts the honest chain") {
        store.seed(n.chain.headerAt(0));
        CHECK(syncHeaders(store, n.chain.headersAfter(0, 100)) == 6);
        CHECK(store.tipNumber() == 6);
    }

    SECTION("gaps and wrong parents are rejected outright") {
        HeaderStore s(1u << 30);
        s.seed(n.chain.headerAt(0));
        CHECK_THROWS_AS(s.append(n.chain.headerAt(2)), BrokenChain);
        BlockHeader wrong = n.chain.headerAt(1);
        wrong.parentHash[5] ^= 1;
        CHECK_THROWS_AS(s.append(wrong), BrokenChain);
        // The store is still usable after a rejected append.
        s.append(n.chain.headerAt(1));
        CHECK(s.tipNumber() == 1);
    }

    SECTION("a batch stops at the first break") {
        HeaderStore s(1u << 30);
        s.seed(n.chain.headerAt(0));
        std::vector<BlockHeader> feed = n.chain.headersAfter(0, 100);
        feed[2].timestamp ^= 1;
        // Headers 1 and 2 land, the forged 3 lands too, 4 breaks on linkage.
        CHECK_THROWS_AS(syncHeaders(s, feed), BrokenChain);
        CHECK(s.tipNumber() == 3);
    }
}

TEST_CASE("the header window stays small at a three-day horizon") {
    const uint64_t horizon = 3 * 86400;
    const uint64_t interval = 15;
    HeaderStore store(horizon);

    // Synthetic chain: linkage is all the store checks, so headers need
    // only hash together.
    BlockHeader h;
    h.number = 0;
    h.timestamp = 0;
    store.seed(h);
    Digest prev = h.hash();
    const uint64_t total = 25000;
    for (uint64_t i = 1; i <= total; i++) {
        BlockHeader next;
        next.parentHash = prev;
        next.number = i;
        next.timestamp = i * interval;
        store.append(next);
        prev = next.hash();
    }
    CHECK(store.size() <= horizon / interval + 1);
    CHECK(store.size() <= 17400);
    CHECK(store.memoryBytes() <= 12u << 20);
    CHECK(store.tipNumber() == total);

    // Pruned numbers answer nothing; the in-window range answers exactly.
    CHECK(store.byNumber(0) == std::nullopt);
    CHECK(store.byNumber(store.firstNumber() - 1) == std::nullopt);
    auto lo = store.byNumber(store.firstNumber());
    REQUIRE(lo);
    CHECK(lo->number == store.firstNumber());
    auto hi = store.byNumber(total);
    REQUIRE(hi);
    CHECK(hi->timestamp == total * interval);
    CHECK(store.byNumber(total + 1) == std::nullopt);
}

TEST_CASE("verification agrees with direct chain inspection") {
    Net n = makeNet(3);
    Address cert = createCert(n, "fuzz.example", {0, 1, 2}, 10);
    TrustAnchors anchors = anchorsFor(n);
    HeaderStore store = storeFor(n.chain);
    auto rng = seededRng(424242, "fuzz");
    uint64_t now = 10;

    for (int round = 0; round < 60; round++) {
        now += 10 + rng() % 120;
        if (rng() % 3 == 0)
            n.chain.mineBlock(now);
        else
            honestUpdate(n, cert, rng() % 3, now);
        syncHeaders(store, n.chain.headersAfter(store.tipNumber(), 1000));

        SmartCertCertificate bundle = assembleCertificate(n.chain, cert);
        VerifyResult v = verifyCert("fuzz.example", bundle, now, store, anchors);

        // The all-seeing check reads contract storage directly.
        uint64_t valid = word(n.chain, cert, "valid");
        uint64_t updated = word(n.chain, cert, "updated");
        Verdict expect = valid == 0                         ? Verdict::Invalid
                         : now > updated + anchors.maxStale ? Verdict::Stale
                                                            : Verdict::Ok;
        CAPTURE(round, now, updated, valid);
        REQUIRE(v.verdict == expect);
        if (v.verdict == Verdict::Ok) REQUIRE(v.st.updated == updated);
    }

    // Finish with a revocation so the invalid arm is exercised too.
    now += 10;
    REQUIRE(run(n.chain, callTx(n.chain, n.cas[0], cert, "revoke", {}), now).status ==
            Receipt::Status::Ok);
    syncHeaders(store, n.chain.headersAfter(store.tipNumber(), 1000));
    SmartCertCertificate bundle = assembleCertificate(n.chain, cert);
    CHECK(verifyCert("fuzz.example", bundle, now, store, anchors).verdict == Verdict::Invalid);
}

TEST_CASE("a full connection accepts only a live certificate") {
    Net n = makeNet(2);
    const SigScheme& scheme = n.chain.scheme();
    Address cert = createCert(n, "shop.example", {0, 1}, 10);
    honestUpdate(n, cert, 0, 20);
    HeaderStore store = storeFor(n.chain);
    TrustAnchors anchors = anchorsFor(n);
    Bytes staple = assembleCertificate(n.chain, cert).serialize();
    auto rng = seededRng(5, "cli");

    SECTION("a well-run server is accepted") {
        HandshakeServer server(scheme, n.tls.priv, [] { return uint64_t(25); }, 77);
        server.setStaple(staple);
        ConnectOutcome out = pipeConnect(server, "shop.example", scheme, 25, store, anchors, rng);
        CHECK(out.accepted);
        CHECK(out.reason == "OK");
        CHECK(out.st.name == "shop.example");
    }

    SECTION("a stapled certificate for another name is refused") {
        HandshakeServer server(scheme, n.tls.priv, [] { return uint64_t(25); }, 77);
        server.setStaple(staple);
        ConnectOutcome out = pipeConnect(server, "other.example", scheme, 25, store, anchors, rng);
        CHECK_FALSE(out.accepted);
        CHECK(out.reason == "NAME_MISMATCH");
    }

    SECTION("a server without the certified key is refused") {
        auto wrongRng = seededRng(66, "wrong");
        KeyPair wrong = scheme.generate(wrongRng);
        HandshakeServer server(scheme, wrong.priv, [] { return uint64_t(25); }, 77);
        server.setStaple(staple);
        ConnectOutcome out = pipeConnect(server, "shop.example", scheme, 25, store, anchors, rng);
        CHECK_FALSE(out.accepted);
        CHECK(out.reason == "BAD_SKE_SIG");
        // The certificate itself was fine; only the key proof failed.
        CHECK(out.st.name == "shop.example");
    }

    SECTION("a revoked staple is refused before the key is even considered") {
        REQUIRE(run(n.chain, callTx(n.chain, n.cas[0], cert, "revoke", {}), 30).status ==
                Receipt::Status::Ok);
        HeaderStore s2 = storeFor(n.chain);
        Bytes revokedStaple = assembleCertificate(n.chain, cert).serialize();
        HandshakeServer server(scheme, n.tls.priv, [] { return uint64_t(35); }, 77);
        server.setStaple(revokedStaple);
        ConnectOutcome out = pipeConnect(server, "shop.example", scheme, 35, s2, anchors, rng);
        CHECK_FALSE(out.accepted);
        CHECK(out.reason == "INVALID");
    }

    SECTION("the same flow works over loopback TCP") {
        HandshakeServer server(scheme, n.tls.priv, [] { return uint64_t(25); }, 77);
        server.setStaple(staple);
        uint16_t port = server.start();
        ConnectOutcome out = clientConnect(port, "shop.example", scheme, 25, store, anchors, rng);
        CHECK(out.accepted);
        CHECK(out.reason == "OK");
        server.stop();
        CHECK_THROWS_AS(clientConnect(port, "shop.example", scheme, 25, store, anchors, rng),
                        ConnectFailed);
    }
}

TEST_CASE("the serving agent refreshes its staple on schedule") {
    Net n = makeNet(2);
    Address cert = createCert(n, "agent.example", {0, 1}, 10);
    HandshakeServer server(n.chain.scheme(), n.tls.priv, [] { return uint64_t(50); }, 99);
    DomainAgent agent(n.chain, cert, server, 60);
    CHECK(server.staple().empty());

    CHECK(agent.tick(100));  // nothing stapled yet, refresh regardless of phase
    CHECK(agent.lastAnchor() == n.chain.head().number);
    Bytes first = server.staple();
    auto parsed = SmartCertCertificate::fromBytes(first);
    REQUIRE(parsed);
    CHECK(parsed->anchorNumber == n.chain.head().number);

    CHECK_FALSE(agent.tick(130));
    CHECK(server.staple() == first);

    n.chain.mineBlock(140);
    CHECK(agent.tick(160));
    CHECK(agent.lastAnchor() == n.chain.head().number);
    CHECK(server.staple() != first);

    SECTION("a refreshed staple is what probes see") {
        auto [cli, srv] = PipeStream::makePair();
        std::thread t([&server, s = std::move(srv)]() mutable {
            try {
                server.serve(*s);
            } catch (const HandshakeError&) {
            }
        });
        ExchangeResult r = runHello(*cli, makeCliRnd(n.cas[0].addr, n.chain.headHash()));
        t.join();
        CHECK(r.staple == server.staple());
    }

    SECTION("a ticking agent keeps the staple anchored near the head") {
        // Mine and tick on independent cadences; after every tick that
        // fires, the stapled anchor is the current head.
        uint64_t now = 200;
        for (int i = 0; i < 20; i++) {
            now += 35;
            n.chain.mineBlock(now);
            if (agent.tick(now)) CHECK(agent.lastAnchor() == n.chain.head().number);
        }
        CHECK(agent.lastAnchor() > 0);
    }

    SECTION("an address without a contract fails loudly") {
        Address nowhere;
        nowhere[0] = 0x42;
        DomainAgent lost(n.chain, nowhere, server, 60);
        CHECK_THROWS_AS(lost.refresh(), UnknownContract);
    }
}

TEST_CASE("policy bootstrap gathers co-signatures") {
    Net n = makeNet(3);
    const SigScheme& scheme = n.chain.scheme();
    auto signer = [&](size_t i) {
        return CoSigner{n.cas[i].addr,
                        [&, i](const Bytes& m) { return scheme.sign(n.cas[i].keys.priv, m); }};
    };
    PolicyDoc d;
    d.keyId = n.owner.addr;
    d.cas = {n.cas[0].addr, n.cas[1].addr, n.cas[2].addr};
    d.maxLifetime = 5000;
    d.minCAs = 2;

    SECTION("one signature suffices for a fresh registration") {
        PolicyDoc solo = d;
        solo.cas = {n.cas[0].addr};
        solo.minCAs = 1;
        Receipt r = run(n.chain,
                        bootstrapPolicy(n.chain, n.owner.keys, "solo.example", solo, {signer(0)}),
                        10);
        REQUIRE(r.status == Receipt::Status::Ok);
        PolicyView pv = readPolicy(n.chain, "solo.example");
        REQUIRE(pv.registered);
        CHECK(pv.sigNo == 1);
    }

    SECTION("the signature count ratchets on replacement") {
        Receipt r = run(n.chain,
                        bootstrapPolicy(n.chain, n.owner.keys, "boot.example", d,
                                        {signer(0), signer(1), signer(2)}),
                        10);
        REQUIRE(r.status == Receipt::Status::Ok);
        PolicyView pv = readPolicy(n.chain, "boot.example");
        REQUIRE(pv.registered);
        CHECK(pv.sigNo == 3);
        CHECK(pv.doc.minCAs == 2);
        CHECK(pv.doc.keyId == n.owner.addr);

        // Replacing with fewer co-signers than before is refused.
        Receipt weak = run(n.chain,
                           bootstrapPolicy(n.chain, n.owner.keys, "boot.example", d, {signer(0)}),
                           20);
        CHECK(weak.status == Receipt::Status::Reverted);
        CHECK(weak.revertReason == "REVERT_INSUFFICIENT_SIGS");

        // Matching the old count is enough.
        Receipt again = run(n.chain,
                            bootstrapPolicy(n.chain, n.owner.keys, "boot.example", d,
                                            {signer(0), signer(1), signer(2)}),
                            30);
        CHECK(again.status == Receipt::Status::Ok);
    }

    SECTION("no signatures at all is refused") {
        Receipt r = run(n.chain, bootstrapPolicy(n.chain, n.owner.keys, "none.example", d, {}), 10);
        CHECK(r.status == Receipt::Status::Reverted);
        CHECK(r.revertReason == "REVERT_INSUFFICIENT_SIGS");
    }

    SECTION("a registered policy constrains certificate creation") {
        PolicyDoc narrow = d;
        narrow.cas = {n.cas[0].addr};
        narrow.minCAs = 1;
        REQUIRE(run(n.chain,
                    bootstrapPolicy(n.chain, n.owner.keys, "narrow.example", narrow, {signer(0)}),
                    10)
                    .status == Receipt::Status::Ok);
        // The excluded CA cannot appear in the certificate's list.
        Transaction tx;
        tx.senderPubKey = n.owner.keys.pub;
        tx.nonce = n.chain.nonceOf(n.owner.addr);
        tx.kind = Transaction::Kind::Create;
        tx.templateId = kCertTemplateId;
        tx.args = buildCertInitArgs("narrow.example", policyContractAddress(), {n.tls.pub},
                                    {n.cas[1].addr});
        tx.signature = scheme.sign(n.owner.keys.priv, tx.signedBytes());
        Receipt r = run(n.chain, std::move(tx), 20);
        CHECK(r.status == Receipt::Status::Reverted);
        CHECK(r.revertReason == "REVERT_CA_NOT_AUTHORIZED");
    }
}
