#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

#include "client.hpp"
#include "domain.hpp"

namespace smartcert {

// -- latency summaries -------------------------------------------------------

struct LatencyStats {
    double minMs = 0;
    double maxMs = 0;
    double avgMs = 0;
    double medianMs = 0;
    size_t samples = 0;
};

inline LatencyStats summarizeLatency(std::vector<double> ms) {
    LatencyStats s;
    if (ms.empty()) return s;
    std::sort(ms.begin(), ms.end());
    s.minMs = ms.front();
    s.maxMs = ms.back();
    s.avgMs = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
    s.medianMs = ms[ms.size() / 2];
    s.samples = ms.size();
    return s;
}

// -- shared fixture ----------------------------------------------------------

/// A validated certificate plus everything a verifier or probe needs, built
/// once on a small deterministic chain. The chain itself is discarded; the
/// fixture keeps only the client-side material and the serving identity.
struct BenchFixture {
    std::string name;
    Bytes certBytes;
    uint64_t now = 0;
    TrustAnchors anchors;
    HeaderStore store{1u << 30};
    KeyPair tls;
    Address caAddr;
    Digest anchorHash;
};

namespace bench_detail {

inline Transaction signedTx(Chain& c, const KeyPair& keys, Transaction tx) {
    tx.senderPubKey = keys.pub;
    tx.nonce = c.nonceOf(keys.address());
    tx.signature = c.scheme().sign(keys.priv, tx.signedBytes());
    return tx;
}

inline Receipt runTx(Chain& c, Transaction tx, uint64_t mineAt) {
    Digest id = c.enqueueUnchecked(std::move(tx));
    c.mineBlock(mineAt);
    auto r = c.receiptOf(id);
    if (!r || r->status != Receipt::Status::Ok)
        throw std::runtime_error("bench fixture transaction failed");
    return *r;
}

}  // namespace bench_detail

inline BenchFixture makeBenchFixture() {
    ChainConfig cfg;
    cfg.schemeName = "testsig";
    cfg.blockInterval = 10;
    cfg.epoch = 100;
    cfg.maxStale = 300;
    const SigScheme& scheme = schemeByName(cfg.schemeName);

    auto caRng = seededRng(100, "ca");
    KeyPair ca = scheme.generate(caRng);
    cfg.trustedCaPubs.push_back(ca.pub);
    auto ownerRng = seededRng(7, "owner");
    KeyPair owner = scheme.generate(ownerRng);
    auto tlsRng = seededRng(8, "tls");
    KeyPair tls = scheme.generate(tlsRng);

    Chain chain = makeChain(cfg);

    Transaction create;
    create.kind = Transaction::Kind::Create;
    create.templateId = kCertTemplateId;
    create.args = buildCertInitArgs("bench.example", policyContractAddress(), {tls.pub},
                                    {ca.address()});
    Address cert = Chain::contractAddress(owner.address(), chain.nonceOf(owner.address()));
    bench_detail::runTx(chain, bench_detail::signedTx(chain, owner, std::move(create)), 20);

    auto probeRng = seededRng(9, "probe");
    Digest cliRnd = makeCliRnd(ca.address(), chain.headHash());
    Bytes srvRnd = makeSrvRnd(30, probeRng);
    Bytes params = makeDhParams(probeRng);
    Bytes sig = scheme.sign(tls.priv, validationMessage(cliRnd, srvRnd, params));
    Transaction update;
    update.kind = Transaction::Kind::Call;
    update.target = cert;
    update.method = "update";
    update.args = buildCertUpdateArgs(cliRnd, srvRnd, params, sig);
    bench_detail::runTx(chain, bench_detail::signedTx(chain, ca, std::move(update)), 30);

    BenchFixture f;
    f.name = "bench.example";
    f.certBytes = assembleCertificate(chain, cert).serialize();
    f.now = chain.head().timestamp + 10;
    f.anchors = TrustAnchors{certCodeHash(), cfg.maxStale};
    f.store.seed(chain.headerAt(0));
    for (uint64_t b = 1; b < chain.sealedCount(); b++) f.store.append(chain.headerAt(b));
    f.tls = tls;
    f.caAddr = ca.address();
    f.anchorHash = chain.headHash();
    return f;
}

// -- certificate verification latency ----------------------------------------

struct VerifyBench {
    LatencyStats accepted;
    LatencyStats rejected;
    size_t certificateBytes = 0;
};

/// Times full verification of one fixed certificate, and separately the
/// early-exit path on a corrupted account proof, over the same iteration
/// count. Wall-clock only; everything else is deterministic.
inline VerifyBench benchVerify(size_t iterations) {
    if (iterations == 0) throw std::invalid_argument("benchVerify: zero iterations");
    BenchFixture f = makeBenchFixture();

    // Flipping the first byte of the proven account body breaks the Merkle
    // check without touching any length field, so every rejected run takes
    // the same path.
    Bytes bad = f.certBytes;
    bad[20 + 8 + 32 + 4] ^= 0x01;

    VerifyBench out;
    out.certificateBytes = f.certBytes.size();
    std::vector<double> okMs, badMs;
    okMs.reserve(iterations);
    badMs.reserve(iterations);
    for (size_t i = 0; i < iterations; i++) {
        auto t0 = std::chrono::steady_clock::now();
        VerifyResult r = verifyCertBytes(f.name, f.certBytes, f.now, f.store, f.anchors);
        auto t1 = std::chrono::steady_clock::now();
        if (r.verdict != Verdict::Ok) throw std::runtime_error("bench certificate rejected");
        okMs.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    for (size_t i = 0; i < iterations; i++) {
        auto t0 = std::chrono::steady_clock::now();
        VerifyResult r = verifyCertBytes(f.name, bad, f.now, f.store, f.anchors);
        auto t1 = std::chrono::steady_clock::now();
        if (r.verdict != Verdict::ProofInconsistent)
            throw std::runtime_error("bench corruption not caught");
        badMs.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    out.accepted = summarizeLatency(std::move(okMs));
    out.rejected = summarizeLatency(std::move(badMs));
    return out;
}

// -- loopback probe throughput -----------------------------------------------

struct ProbeBench {
    uint64_t handshakes = 0;
    uint64_t failures = 0;
    double seconds = 0;
    double perSecond = 0;
    unsigned endpoints = 0;
    unsigned parallelism = 0;
};

/// Sustained CA probe rate against loopback endpoints: each worker connects
/// round-robin, runs the hello exchange, and checks the key-exchange
/// signature like a real validation probe. Endpoints all serve the same
/// fixture identity and staple.
inline ProbeBench benchProbe(unsigned endpointCount, unsigned parallelism,
                             double seconds = 10.0) {
    if (endpointCount == 0 || parallelism == 0)
        throw std::invalid_argument("benchProbe: zero endpoints or workers");
    const SigScheme& scheme = schemeByName("testsig");
    BenchFixture f = makeBenchFixture();

    std::vector<std::unique_ptr<HandshakeServer>> servers;
    std::vector<uint16_t> ports;
    for (unsigned i = 0; i < endpointCount; i++) {
        auto srv = std::make_unique<HandshakeServer>(
            scheme, f.tls.priv, [now = f.now] { return now; }, 6000 + i);
        srv->setStaple(f.certBytes);
        ports.push_back(srv->start());
        servers.push_back(std::move(srv));
    }

    std::atomic<bool> stop{false};
    std::atomic<uint64_t> good{0};
    std::atomic<uint64_t> bad{0};
    auto worker = [&](unsigned w) {
        size_t next = w % ports.size();
        while (!stop.load(std::memory_order_relaxed)) {
            try {
                ValidationProof p = caProbe(ports[next], f.caAddr, f.anchorHash);
                Bytes msg = validationMessage(p.cliRnd, p.srvRnd, p.params);
                if (scheme.verify(f.tls.pub, msg, p.sig))
                    good.fetch_add(1, std::memory_order_relaxed);
                else
                    bad.fetch_add(1, std::memory_order_relaxed);
            } catch (const std::exception&) {
                bad.fetch_add(1, std::memory_order_relaxed);
            }
            next = (next + 1) % ports.size();
        }
    };

    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < parallelism; w++) pool.emplace_back(worker, w);
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    stop = true;
    for (auto& t : pool) t.join();
    auto t1 = std::chrono::steady_clock::now();

    ProbeBench out;
    out.handshakes = good.load();
    out.failures = bad.load();
    out.seconds = std::chrono::duration<double>(t1 - t0).count();
    out.perSecond = out.seconds > 0 ? static_cast<double>(out.handshakes) / out.seconds : 0;
    out.endpoints = endpointCount;
    out.parallelism = parallelism;
    return out;
}

}  // namespace smartcert
