#pragma once

#include <deque>

#include "domain.hpp"

namespace smartcert {

class BrokenChain : public std::runtime_error {
public:
    explicit BrokenChain(uint64_t number)
        : std::runtime_error("header " + std::to_string(number) + " does not extend the chain") {}
};

/// Sliding window of recent headers. Integrity comes from the parent-hash
/// chain: each appended header must extend the current tip, so a tampered
/// header is caught when the next one fails to link to it. Old headers are
/// dropped once they age past the horizon, measured against the newest
/// header's timestamp.
class HeaderStore {
public:
    explicit HeaderStore(uint64_t pruneHorizon) : horizon_(pruneHorizon) {}

    /// Installs the trusted starting header (genesis or a checkpoint),
    /// discarding anything held before.
    void seed(const BlockHeader& h) {
        headers_.clear();
        headers_.push_back(h);
        tipHash_ = h.hash();
    }

    void append(const BlockHeader& h) {
        if (headers_.empty() || h.parentHash != tipHash_ || h.number != tipNumber() + 1)
            throw BrokenChain(h.number);
        headers_.push_back(h);
        tipHash_ = h.hash();
        while (headers_.front().timestamp + horizon_ < h.timestamp) headers_.pop_front();
    }

    std::optional<BlockHeader> byNumber(uint64_t n) const {
        if (headers_.empty() || n < headers_.front().number || n > tipNumber()) return std::nullopt;
        return headers_[n - headers_.front().number];
    }

    size_t size() const { return headers_.size(); }
    bool empty() const { return headers_.empty(); }
    uint64_t tipNumber() const { return headers_.back().number; }
    uint64_t firstNumber() const { return headers_.front().number; }
    const Digest& tipHash() const { return tipHash_; }
    uint64_t horizon() const { return horizon_; }

    /// Rough footprint: header wire bytes plus one cached tip digest per
    /// store, used by the sizing checks.
    size_t memoryBytes() const { return headers_.size() * BlockHeader::kWireSize + 32; }

private:
    uint64_t horizon_;
    std::deque<BlockHeader> headers_;
    Digest tipHash_;
};

/// Appends a batch in order; a header that fails to link throws BrokenChain
/// and leaves the good prefix behind.
inline size_t syncHeaders(HeaderStore& store, const std::vector<BlockHeader>& feed) {
    size_t n = 0;
    for (const BlockHeader& h : feed) {
        store.append(h);
        n++;
    }
    return n;
}

// -- certificate verification ------------------------------------------------

enum class Verdict : uint8_t {
    Ok = 0,
    UnknownRoot,
    ProofInconsistent,
    BadCode,
    BadStorageProof,
    NameMismatch,
    Invalid,
    Stale,
    DecodeError,
};

inline const char* verdictName(Verdict v) {
    switch (v) {
        case Verdict::Ok: return "OK";
        case Verdict::UnknownRoot: return "UNKNOWN_ROOT";
        case Verdict::ProofInconsistent: return "PROOF_INCONSISTENT";
        case Verdict::BadCode: return "BAD_CODE";
        case Verdict::BadStorageProof: return "BAD_STORAGE_PROOF";
        case Verdict::NameMismatch: return "NAME_MISMATCH";
        case Verdict::Invalid: return "INVALID";
        case Verdict::Stale: return "STALE";
        case Verdict::DecodeError: return "DECODE_ERROR";
    }
    return "UNKNOWN";
}

struct TrustAnchors {
    Digest codeHash;
    uint64_t maxStale = 0;
};

/// What the client decodes out of a proven certificate.
struct CertSnapshot {
    std::string name;
    std::vector<Bytes> pks;
    uint64_t created = 0;
    uint64_t updated = 0;
    bool revoked = false;
    bool valid = false;
};

struct VerifyResult {
    Verdict verdict = Verdict::DecodeError;
    CertSnapshot st;  // populated once decoding succeeded

    bool ok() const { return verdict == Verdict::Ok; }
};

namespace client_detail {

inline CertSnapshot decodeSnapshot(const SmartCertCertificate& cert) {
    auto loader = [&](const std::string& label) { return cert.slotValue(label); };
    auto req = [&](const std::string& label) -> Bytes {
        std::optional<Bytes> v = cert.slotValue(label);
        if (!v) throw DecodeError("missing slot: " + label);
        return *v;
    };
    auto flag = [&](const std::string& label) -> bool {
        uint64_t v = wordValue(req(label));
        if (v > 1) throw DecodeError("flag slot out of range: " + label);
        return v == 1;
    };

    CertSnapshot st;
    Bytes raw = loadChunked(loader, "nameRaw");
    st.name = std::string(raw.begin(), raw.end());
    // The hash slot pins the full name; a chunk withheld from the bundle
    // would surface here.
    Bytes nh = req("name");
    if (nh.size() != 32 || sha256(st.name).toBytes() != nh)
        throw DecodeError("name does not match its hash");

    uint64_t pkCount = wordValue(req("pkCount"));
    for (uint64_t j = 0; j < pkCount; j++) {
        Bytes pk = loadChunked(loader, "pk:" + std::to_string(j));
        if (pk.empty()) throw DecodeError("empty public key entry");
        st.pks.push_back(std::move(pk));
    }

    st.created = wordValue(req("created"));
    st.updated = wordValue(req("updated"));
    st.revoked = flag("revoked");
    st.valid = flag("valid");
    return st;
}

}  // namespace client_detail

/// Pure certificate check: consults only the bundle, the header window and
/// the pinned anchors. Checks run in a fixed order so a certificate failing
/// several of them always reports the same reason.
inline VerifyResult verifyCert(const std::string& name, const SmartCertCertificate& cert,
                               uint64_t timeNow, const HeaderStore& headers,
                               const TrustAnchors& anchors) {
    std::optional<BlockHeader> anchor = headers.byNumber(cert.anchorNumber);
    if (!anchor) return {Verdict::UnknownRoot, {}};

    if (cert.accountProof.key != sha256(cert.addr.toBytes()) ||
        !Trie::verify(anchor->stateRoot, cert.accountProof))
        return {Verdict::ProofInconsistent, {}};
    Account acct;
    try {
        ByteReader r(cert.accountProof.value);
        acct = Account::parse(r);
        r.expectDone();
    } catch (const DecodeError&) {
        return {Verdict::ProofInconsistent, {}};
    }

    if (acct.codeHash != anchors.codeHash) return {Verdict::BadCode, {}};

    for (const auto& [label, proof] : cert.slots)
        if (proof.key != slotKey(label) || !Trie::verify(acct.storageRoot, proof))
            return {Verdict::BadStorageProof, {}};

    CertSnapshot st;
    try {
        st = client_detail::decodeSnapshot(cert);
    } catch (const DecodeError&) {
        return {Verdict::DecodeError, {}};
    }

    if (st.name != name) return {Verdict::NameMismatch, std::move(st)};
    if (!st.valid) return {Verdict::Invalid, std::move(st)};
    if (timeNow > st.updated + anchors.maxStale) return {Verdict::Stale, std::move(st)};
    return {Verdict::Ok, std::move(st)};
}

/// Wire-bytes entry point; malformed bytes report DECODE_ERROR instead of
/// throwing.
inline VerifyResult verifyCertBytes(const std::string& name, const Bytes& wire, uint64_t timeNow,
                                    const HeaderStore& headers, const TrustAnchors& anchors) {
    std::optional<SmartCertCertificate> cert = SmartCertCertificate::fromBytes(wire);
    if (!cert) return {Verdict::DecodeError, {}};
    return verifyCert(name, *cert, timeNow, headers, anchors);
}

// -- full client connection --------------------------------------------------

struct ConnectOutcome {
    bool accepted = false;
    std::string reason;  // "OK", a verdict name, or "BAD_SKE_SIG"
    CertSnapshot st;
};

/// Client side of a full handshake: hello exchange, certificate check, then
/// the key-exchange signature under one of the certificate's keys. Transport
/// failures propagate as HandshakeError.
inline ConnectOutcome clientConnect(MsgStream& s, const std::string& name, const SigScheme& scheme,
                                    uint64_t timeNow, const HeaderStore& headers,
                                    const TrustAnchors& anchors, std::mt19937_64& rng) {
    Digest cliRnd;
    uint32_t t = static_cast<uint32_t>(timeNow);
    for (int i = 0; i < 4; i++) cliRnd[i] = static_cast<uint8_t>(t >> (8 * (3 - i)));
    for (size_t i = 4; i < 32; i++) cliRnd[i] = static_cast<uint8_t>(rng());

    ExchangeResult ex = runHello(s, cliRnd);
    VerifyResult v = verifyCertBytes(name, ex.staple, timeNow, headers, anchors);
    if (!v.ok()) return {false, verdictName(v.verdict), std::move(v.st)};

    Bytes msg = validationMessage(cliRnd, ex.srvRnd, ex.params);
    for (const Bytes& pk : v.st.pks)
        if (scheme.verify(pk, msg, ex.sig)) return {true, "OK", std::move(v.st)};
    return {false, "BAD_SKE_SIG", std::move(v.st)};
}

inline ConnectOutcome clientConnect(uint16_t port, const std::string& name, const SigScheme& scheme,
                                    uint64_t timeNow, const HeaderStore& headers,
                                    const TrustAnchors& anchors, std::mt19937_64& rng) {
    std::unique_ptr<MsgStream> s = connectTcp(port);
    return clientConnect(*s, name, scheme, timeNow, headers, anchors, rng);
}

}  // namespace smartcert
