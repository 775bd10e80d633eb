#pragma once

#include <algorithm>
#include <map>

#include "chain.hpp"

namespace smartcert {

inline constexpr uint64_t kDefaultMaxLifetime = 63072000;  // two years of seconds
inline constexpr const char* kCertTemplateId = "smartcert";
inline constexpr const char* kCertAltTemplateId = "smartcert2";
inline constexpr const char* kPolicyTemplateId = "policy";

// -- storage words ----------------------------------------------------------

/// Numbers live in storage as 32-byte big-endian words so every proven slot
/// has the same shape.
inline Bytes beWord(uint64_t v) {
    Bytes out(32, 0);
    for (int i = 0; i < 8; i++) out[31 - i] = static_cast<uint8_t>(v >> (8 * i));
    return out;
}

inline uint64_t wordValue(const Bytes& v) {
    if (v.size() != 32) throw DecodeError("storage word must be 32 bytes");
    for (size_t i = 0; i < 24; i++)
        if (v[i] != 0) throw DecodeError("storage word overflows 64 bits");
    uint64_t out = 0;
    for (size_t i = 24; i < 32; i++) out = out << 8 | v[i];
    return out;
}

inline Address addressFromBytes(const Bytes& b) {
    if (b.size() != 20) throw DecodeError("address slot must be 20 bytes");
    Address a;
    std::memcpy(a.data(), b.data(), 20);
    return a;
}

// -- slot naming ------------------------------------------------------------

inline std::string trustedSlot(const Address& ca) { return "trusted:" + ca.hex(); }
inline std::string policySlot(const std::string& name) {
    return "policy:" + sha256(name).hex();
}
inline std::string caField(const Address& ca, const std::string& field) {
    return "ca:" + ca.hex() + ":" + field;
}

// Values wider than one word are spread over "<base>:0", "<base>:1", ...;
// every chunk is 32 bytes except the last, which carries the exact
// remainder, so the reader stops at the first absent or short chunk.
template <class LoadFn>
Bytes loadChunked(const LoadFn& load, const std::string& base) {
    Bytes out;
    for (size_t i = 0;; i++) {
        std::optional<Bytes> c = load(base + ":" + std::to_string(i));
        if (!c || c->empty()) break;
        if (c->size() > 32) throw DecodeError("oversized storage chunk");
        out.insert(out.end(), c->begin(), c->end());
        if (c->size() < 32) break;
    }
    return out;
}

inline void storeChunked(ExecEnv& env, const std::string& base, const Bytes& v) {
    size_t n = 0;
    for (size_t off = 0; off < v.size(); off += 32, n++) {
        size_t end = std::min(v.size(), off + 32);
        env.store(base + ":" + std::to_string(n), Bytes(v.begin() + off, v.begin() + end));
    }
    // terminate in case a longer value sat here before
    env.store(base + ":" + std::to_string(n), {});
}

// -- policy documents -------------------------------------------------------

/// A domain's validation policy. The canonical byte form is what CAs sign
/// and what the policy contract stores, so it is bit-exact: unset key id is
/// twenty zero bytes, CA addresses are strictly ascending, and the error
/// budget is a presence flag plus an always-present value field.
struct PolicyDoc {
    enum class Type : uint8_t { New = 0, Update = 1 };

    uint64_t version = 1;
    Type type = Type::New;
    std::optional<Address> keyId;
    std::vector<Address> cas;
    uint64_t maxLifetime = kDefaultMaxLifetime;
    std::optional<uint64_t> maxErr;
    uint32_t minCAs = 1;

    Bytes canonical() const {
        std::vector<Address> sorted = cas;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        ByteWriter w;
        w.u64(version);
        w.u8(static_cast<uint8_t>(type));
        w.raw(keyId ? *keyId : Address{});
        w.u16(static_cast<uint16_t>(sorted.size()));
        for (const Address& a : sorted) w.raw(a);
        w.u64(maxLifetime);
        w.u8(maxErr ? 1 : 0);
        w.u64(maxErr.value_or(0));
        w.u32(minCAs);
        return w.take();
    }

    static PolicyDoc parseCanonical(ByteReader& r) {
        PolicyDoc d;
        d.version = r.u64();
        uint8_t t = r.u8();
        if (t > 1) throw DecodeError("bad policy type");
        d.type = static_cast<Type>(t);
        Address k = r.fixed<20>();
        if (!k.isZero()) d.keyId = k;
        uint16_t n = r.u16();
        for (uint16_t i = 0; i < n; i++) {
            Address a = r.fixed<20>();
            if (i > 0 && !(d.cas.back() < a)) throw DecodeError("CA list not strictly ascending");
            d.cas.push_back(a);
        }
        d.maxLifetime = r.u64();
        uint8_t flag = r.u8();
        if (flag > 1) throw DecodeError("bad error budget flag");
        uint64_t mv = r.u64();
        if (flag)
            d.maxErr = mv;
        else if (mv != 0)
            throw DecodeError("absent error budget must be zeroed");
        d.minCAs = r.u32();
        return d;
    }
};

/// CAs sign the policy bound to its name; the name is length-framed so the
/// name/document boundary cannot shift.
inline Bytes policySignMessage(const std::string& name, const PolicyDoc& doc) {
    ByteWriter w;
    w.lp16(name);
    w.raw(doc.canonical());
    return w.take();
}

struct PolicyView {
    bool registered = false;
    PolicyDoc doc;
    uint32_t sigNo = 0;
};

/// Reads the policy for a name through any slot loader pointed at the policy
/// contract. Unregistered names resolve to the default policy: no key id,
/// every trusted CA authorized, default lifetime, no error budget, one CA
/// required.
template <class LoadFn>
PolicyView policyViewFrom(const LoadFn& load, const std::string& name) {
    PolicyView v;
    if (std::optional<Bytes> blob = load(policySlot(name)); blob && !blob->empty()) {
        ByteReader r(std::move(*blob));
        v.doc = PolicyDoc::parseCanonical(r);
        v.sigNo = r.u32();
        r.expectDone();
        v.registered = true;
        return v;
    }
    v.doc.version = 0;
    v.doc.minCAs = 1;
    if (std::optional<Bytes> tl = load("trustedList"); tl && !tl->empty()) {
        if (tl->size() % 20 != 0) throw DecodeError("trusted list malformed");
        for (size_t off = 0; off < tl->size(); off += 20)
            v.doc.cas.push_back(addressFromBytes(Bytes(tl->begin() + off, tl->begin() + off + 20)));
    }
    return v;
}

// -- compliance -------------------------------------------------------------

struct PolicyRules {
    std::vector<Address> cas;
    std::optional<uint64_t> maxErr;
    uint64_t maxLifetime = kDefaultMaxLifetime;
    uint32_t minCAs = 1;
};

/// Counts the CAs that are policy-authorized and within the error budget.
/// The rule text puts the lifetime test inside the per-CA loop; it is
/// CA-independent, so with MIN_CAs >= 1 this hoisted form is equivalent.
/// Precondition: now >= created.
inline bool certCompliant(const PolicyRules& p,
                          const std::vector<std::pair<Address, uint64_t>>& tracked,
                          uint64_t created, uint64_t now) {
    if (now - created > p.maxLifetime) return false;
    uint32_t count = 0;
    for (const auto& [ca, errNo] : tracked) {
        if (std::find(p.cas.begin(), p.cas.end(), ca) == p.cas.end()) continue;
        if (p.maxErr && errNo > *p.maxErr) continue;
        count++;
    }
    return count >= p.minCAs;
}

// -- validation proof material ----------------------------------------------

/// The client random a CA sends when probing: its own tag plus the leading
/// 28 bytes of a recent block hash.
inline Digest makeCliRnd(const Address& ca, const Digest& blockHash) {
    Digest out;
    CaTag tag = caTag(ca);
    std::memcpy(out.data(), tag.data(), 4);
    std::memcpy(out.data() + 4, blockHash.data(), 28);
    return out;
}

/// What the server's handshake key signs: both randoms and the ephemeral
/// parameters, in wire order.
inline Bytes validationMessage(const Digest& cliRnd, const Bytes& srvRnd, const Bytes& params) {
    if (srvRnd.size() != 32) throw DecodeError("server random must be 32 bytes");
    ByteWriter w;
    w.raw(cliRnd);
    w.raw(srvRnd);
    w.raw(params);
    return w.take();
}

// -- method argument encodings ----------------------------------------------

inline Bytes buildNewPolicyArgs(const std::string& name, const PolicyDoc& doc,
                                std::vector<std::pair<Address, Bytes>> sigs) {
    std::sort(sigs.begin(), sigs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (size_t i = 1; i < sigs.size(); i++)
        if (!(sigs[i - 1].first < sigs[i].first)) throw DecodeError("duplicate policy signer");
    ByteWriter w;
    w.lp16(name);
    w.lp32(doc.canonical());
    w.u16(static_cast<uint16_t>(sigs.size()));
    for (const auto& [addr, sig] : sigs) {
        w.raw(addr);
        w.lp32(sig);
    }
    return w.take();
}

inline Bytes buildCertInitArgs(const std::string& name, const Address& policyAddr,
                               const std::vector<Bytes>& keys, std::vector<Address> cas) {
    std::sort(cas.begin(), cas.end());
    cas.erase(std::unique(cas.begin(), cas.end()), cas.end());
    ByteWriter w;
    w.lp16(name);
    w.raw(policyAddr);
    w.u16(static_cast<uint16_t>(keys.size()));
    for (const Bytes& k : keys) w.lp32(k);
    w.u16(static_cast<uint16_t>(cas.size()));
    for (const Address& a : cas) w.raw(a);
    return w.take();
}

inline Bytes buildCertUpdateArgs(const Digest& cliRnd, const Bytes& srvRnd, const Bytes& params,
                                 const Bytes& sig) {
    if (srvRnd.size() != 32) throw DecodeError("server random must be 32 bytes");
    ByteWriter w;
    w.raw(cliRnd);
    w.raw(srvRnd);
    w.lp16(params);
    w.lp32(sig);
    return w.take();
}

// -- decoded certificate state ----------------------------------------------

struct CertState {
    std::string name;
    Digest nameHash;
    Address policyAddr;
    std::vector<Bytes> pks;
    uint64_t created = 0;
    uint64_t updated = 0;
    bool revoked = false;
    bool valid = false;
    struct CaState {
        uint64_t lastUpd = 0;
        uint64_t lastErr = 0;
        uint64_t errNo = 0;
    };
    std::vector<Address> cas;
    std::map<Address, CaState> s;
    std::vector<Address> revs;
};

/// Full decode of a certificate contract's storage through a slot loader.
/// Any structural problem surfaces as DecodeError.
template <class LoadFn>
CertState readCertState(const LoadFn& load) {
    auto req = [&](const std::string& label) -> Bytes {
        std::optional<Bytes> v = load(label);
        if (!v || v->empty()) throw DecodeError("missing slot: " + label);
        return *v;
    };
    auto flag = [&](const std::string& label) -> bool {
        uint64_t v = wordValue(req(label));
        if (v > 1) throw DecodeError("flag slot out of range: " + label);
        return v == 1;
    };

    CertState st;
    Bytes nh = req("name");
    if (nh.size() != 32) throw DecodeError("name hash must be 32 bytes");
    std::memcpy(st.nameHash.data(), nh.data(), 32);
    Bytes raw = loadChunked(load, "nameRaw");
    st.name = std::string(raw.begin(), raw.end());
    if (sha256(st.name) != st.nameHash) throw DecodeError("name does not match its hash");
    st.policyAddr = addressFromBytes(req("policy"));

    uint64_t pkCount = wordValue(req("pkCount"));
    for (uint64_t j = 0; j < pkCount; j++) {
        Bytes pk = loadChunked(load, "pk:" + std::to_string(j));
        if (pk.empty()) throw DecodeError("empty public key entry");
        st.pks.push_back(std::move(pk));
    }

    st.created = wordValue(req("created"));
    st.updated = wordValue(req("updated"));
    st.revoked = flag("revoked");
    st.valid = flag("valid");

    uint64_t caCount = wordValue(req("caCount"));
    for (uint64_t i = 0; i < caCount; i++) {
        Address ca = addressFromBytes(req("caAddr:" + std::to_string(i)));
        st.cas.push_back(ca);
        CertState::CaState cs;
        cs.lastUpd = wordValue(req(caField(ca, "lastUpd")));
        cs.lastErr = wordValue(req(caField(ca, "lastErr")));
        cs.errNo = wordValue(req(caField(ca, "errNo")));
        st.s[ca] = cs;
    }

    uint64_t revCount = wordValue(req("revCount"));
    for (uint64_t i = 0; i < revCount; i++)
        st.revs.push_back(addressFromBytes(req("rev:" + std::to_string(i))));
    return st;
}

// -- contract handlers ------------------------------------------------------

inline Address policyContractAddress() {
    Digest d = sha256(std::string("genesis:policy"));
    Address a;
    std::memcpy(a.data(), d.data(), 20);
    return a;
}

namespace contract_detail {

inline std::optional<Bytes> selfLoad(ExecEnv& env, const std::string& label) {
    Bytes v = env.load(label);
    if (v.empty()) return std::nullopt;
    return v;
}

inline void policyNew(ExecEnv& env) {
    ByteReader r = env.args();
    std::string name = r.lpstr16();
    Bytes canonical = r.lp32();
    uint16_t nSigs = r.u16();
    std::vector<std::pair<Address, Bytes>> sigs;
    for (uint16_t i = 0; i < nSigs; i++) {
        Address a = r.fixed<20>();
        if (i > 0 && !(sigs.back().first < a)) throw DecodeError("signers not strictly ascending");
        Bytes s = r.lp32();
        sigs.emplace_back(a, std::move(s));
    }
    r.expectDone();

    ByteReader cr(canonical);
    PolicyDoc doc = PolicyDoc::parseCanonical(cr);
    cr.expectDone();
    if (doc.minCAs == 0) env.revert("REVERT_BAD_POLICY");
    for (const Address& ca : doc.cas)
        if (env.load(trustedSlot(ca)).empty()) env.revert("REVERT_UNTRUSTED_CA");

    std::string slot = policySlot(name);
    Bytes existing = env.load(slot);
    bool had = !existing.empty();
    uint32_t prevSigNo = 0;
    std::optional<Address> prevKeyId;
    if (had) {
        ByteReader er(existing);
        PolicyDoc ex = PolicyDoc::parseCanonical(er);
        prevSigNo = er.u32();
        er.expectDone();
        prevKeyId = ex.keyId;
    }

    uint32_t sigNo;
    if (had && doc.type == PolicyDoc::Type::Update) {
        // Management-key path: the holder of the registered key id may swap
        // the policy outright. The replacement threshold carries over and
        // any offered signatures are not consulted.
        if (!prevKeyId || *prevKeyId != env.sender) env.revert("REVERT_UNAUTHORIZED");
        sigNo = prevSigNo;
    } else {
        if (sigs.empty()) env.revert("REVERT_INSUFFICIENT_SIGS");
        if (had && prevSigNo > sigs.size()) env.revert("REVERT_INSUFFICIENT_SIGS");
        ByteWriter mw;
        mw.lp16(name);
        mw.raw(canonical);
        Bytes msg = mw.take();
        for (const auto& [signer, sig] : sigs) {
            Bytes pub = env.load(trustedSlot(signer));
            if (pub.empty()) env.revert("REVERT_UNTRUSTED_SIGNER");
            env.countOp(10);
            if (!env.scheme().verify(pub, msg, sig)) env.revert("REVERT_BAD_SIG");
        }
        sigNo = static_cast<uint32_t>(sigs.size());
    }

    ByteWriter w;
    w.raw(canonical);
    w.u32(sigNo);
    env.store(slot, w.take());
    env.emit(had ? "PolicyReplaced" : "PolicyRegistered",
             {{"name", name},
              {"version", std::to_string(doc.version)},
              {"sigNo", std::to_string(sigNo)}});
}

inline std::vector<Address> trackedCAs(ExecEnv& env) {
    uint64_t count = wordValue(env.load("caCount"));
    std::vector<Address> out;
    for (uint64_t i = 0; i < count; i++)
        out.push_back(addressFromBytes(env.load("caAddr:" + std::to_string(i))));
    return out;
}

inline PolicyView livePolicy(ExecEnv& env) {
    Address policyAddr = addressFromBytes(env.load("policy"));
    Bytes raw = loadChunked([&](const std::string& l) { return selfLoad(env, l); }, "nameRaw");
    std::string name(raw.begin(), raw.end());
    return policyViewFrom([&](const std::string& l) { return env.loadOf(policyAddr, l); }, name);
}

inline void certInit(ExecEnv& env) {
    ByteReader r = env.args();
    std::string name = r.lpstr16();
    Address policyAddr = r.fixed<20>();
    uint16_t kc = r.u16();
    std::vector<Bytes> keys;
    for (uint16_t j = 0; j < kc; j++) keys.push_back(r.lp32());
    uint16_t cc = r.u16();
    std::vector<Address> cas;
    for (uint16_t i = 0; i < cc; i++) {
        Address a = r.fixed<20>();
        if (i > 0 && !(cas.back() < a)) throw DecodeError("CA list not strictly ascending");
        cas.push_back(a);
    }
    r.expectDone();

    if (keys.empty()) env.revert("REVERT_BAD_ARGS");
    // The registry address is a chain-wide singleton; a certificate bound to
    // anything else would dodge the real policy.
    if (policyAddr != policyContractAddress()) env.revert("REVERT_BAD_ARGS");

    PolicyView p =
        policyViewFrom([&](const std::string& l) { return env.loadOf(policyAddr, l); }, name);
    if (p.registered && (!p.doc.keyId || *p.doc.keyId != env.sender))
        env.revert("REVERT_UNAUTHORIZED");
    for (const Address& ca : cas)
        if (std::find(p.doc.cas.begin(), p.doc.cas.end(), ca) == p.doc.cas.end())
            env.revert("REVERT_CA_NOT_AUTHORIZED");

    Bytes nameBytes(name.begin(), name.end());
    env.store("name", sha256(name).toBytes());
    storeChunked(env, "nameRaw", nameBytes);
    env.store("policy", policyAddr.toBytes());
    env.store("pkCount", beWord(keys.size()));
    for (size_t j = 0; j < keys.size(); j++)
        storeChunked(env, "pk:" + std::to_string(j), keys[j]);
    env.store("caCount", beWord(cas.size()));
    for (size_t i = 0; i < cas.size(); i++) {
        env.store("caAddr:" + std::to_string(i), cas[i].toBytes());
        env.store(caField(cas[i], "lastUpd"), beWord(env.now));
        env.store(caField(cas[i], "lastErr"), beWord(0));
        env.store(caField(cas[i], "errNo"), beWord(0));
    }
    env.store("created", beWord(env.now));
    env.store("updated", beWord(0));
    env.store("revoked", beWord(0));
    env.store("valid", beWord(1));
    env.store("revCount", beWord(0));
    env.emit("CertCreated", {{"name", name},
                             {"keys", std::to_string(keys.size())},
                             {"cas", std::to_string(cas.size())}});
}

inline bool recomputeCompliance(ExecEnv& env, const std::vector<Address>& cas) {
    PolicyView p = livePolicy(env);
    PolicyRules rules{p.doc.cas, p.doc.maxErr, p.doc.maxLifetime, p.doc.minCAs};
    std::vector<std::pair<Address, uint64_t>> tracked;
    for (const Address& ca : cas)
        tracked.emplace_back(ca, wordValue(env.load(caField(ca, "errNo"))));
    uint64_t created = wordValue(env.load("created"));
    return certCompliant(rules, tracked, created, env.now);
}

inline void certUpdate(ExecEnv& env) {
    ByteReader r = env.args();
    Digest cliRnd = r.fixed<32>();
    Bytes srvRnd = r.bytes(32);
    Bytes params = r.lp16();
    Bytes sig = r.lp32();
    r.expectDone();

    std::vector<Address> cas = trackedCAs(env);
    if (std::find(cas.begin(), cas.end(), env.sender) == cas.end())
        env.revert("REVERT_UNAUTHORIZED");
    if (wordValue(env.load("valid")) == 0) env.revert("REVERT_ALREADY_INVALID");

    uint64_t epoch = env.cfg().epoch;

    // Missed-validation sweep over every tracked CA. Advancing lastUpd by
    // the missed span keeps each missed epoch charged exactly once.
    for (const Address& ca : cas) {
        uint64_t lastUpd = wordValue(env.load(caField(ca, "lastUpd")));
        uint64_t missed = (env.now - lastUpd) / epoch;
        if (missed >= 1) {
            uint64_t errNo = wordValue(env.load(caField(ca, "errNo")));
            env.store(caField(ca, "errNo"), beWord(errNo + missed));
            env.store(caField(ca, "lastErr"), beWord(env.now - epoch));
            env.store(caField(ca, "lastUpd"), beWord(lastUpd + missed * epoch));
        }
    }

    // The probed block hash must come from the running epoch.
    uint64_t epochStart = env.now - env.now % epoch;
    bool fresh = false;
    for (uint64_t i = 1; i <= env.cfg().hashWindow && i <= env.sealedCount(); i++) {
        if (env.lastBTime(i) < epochStart) break;
        if (cliRnd == makeCliRnd(env.sender, env.lastBHash(i))) {
            fresh = true;
            break;
        }
    }

    Bytes msg = validationMessage(cliRnd, srvRnd, params);
    bool sigOk = false;
    uint64_t pkCount = wordValue(env.load("pkCount"));
    for (uint64_t j = 0; j < pkCount && !sigOk; j++) {
        Bytes pk = loadChunked([&](const std::string& l) { return selfLoad(env, l); },
                               "pk:" + std::to_string(j));
        env.countOp(10);
        sigOk = env.scheme().verify(pk, msg, sig);
    }

    if (!fresh || !sigOk) {
        uint64_t errNo = wordValue(env.load(caField(env.sender, "errNo"))) + 1;
        env.store(caField(env.sender, "lastErr"), beWord(env.now));
        env.store(caField(env.sender, "errNo"), beWord(errNo));
        env.emit("ValidationError",
                 {{"ca", env.sender.hex()}, {"errNo", std::to_string(errNo)}});
    } else {
        env.store(caField(env.sender, "lastUpd"), beWord(env.now));
        env.emit("ValidationOk", {{"ca", env.sender.hex()}, {"at", std::to_string(env.now)}});
    }

    env.store("updated", beWord(env.now));
    env.store("valid", beWord(recomputeCompliance(env, cas) ? 1 : 0));
}

inline void certRevoke(ExecEnv& env) {
    ByteReader r = env.args();
    r.expectDone();

    PolicyView p = livePolicy(env);
    bool isKeyId = p.doc.keyId && *p.doc.keyId == env.sender;
    bool isCa = std::find(p.doc.cas.begin(), p.doc.cas.end(), env.sender) != p.doc.cas.end();
    if (!isKeyId && !isCa) env.revert("REVERT_UNAUTHORIZED");

    uint64_t revCount = wordValue(env.load("revCount"));
    if (isCa) {
        bool already = false;
        for (uint64_t i = 0; i < revCount && !already; i++)
            already = addressFromBytes(env.load("rev:" + std::to_string(i))) == env.sender;
        if (!already) {
            env.store("rev:" + std::to_string(revCount), env.sender.toBytes());
            revCount++;
            env.store("revCount", beWord(revCount));
        }
    }

    // Once revoked, the verdict and its timestamp are frozen; later calls
    // may only grow the revoker set.
    if (wordValue(env.load("revoked")) == 1) return;

    uint64_t caTotal = p.doc.cas.size();
    uint64_t stillStanding = caTotal > revCount ? caTotal - revCount : 0;
    bool trigger = isKeyId || (env.cfg().revokeQuorum ? revCount >= p.doc.minCAs
                                                      : stillStanding >= p.doc.minCAs);
    if (trigger) {
        env.store("revoked", beWord(1));
        env.store("valid", beWord(0));
        env.store("updated", beWord(env.now));
        env.emit("Revoked",
                 {{"by", env.sender.hex()}, {"revs", std::to_string(revCount)}});
    }
}

}  // namespace contract_detail

inline ContractTemplate policyTemplate() {
    ContractTemplate t;
    t.id = kPolicyTemplateId;
    t.version = "1";
    t.handler = [](ExecEnv& env) {
        if (env.method() == "init") return;  // installed at genesis, nothing to set up
        if (env.method() == "newPolicy") return contract_detail::policyNew(env);
        env.revert("NO_SUCH_METHOD");
    };
    return t;
}

inline ContractHandler certHandler() {
    return [](ExecEnv& env) {
        if (env.method() == "init") return contract_detail::certInit(env);
        if (env.method() == "update") return contract_detail::certUpdate(env);
        if (env.method() == "revoke") return contract_detail::certRevoke(env);
        env.revert("NO_SUCH_METHOD");
    };
}

inline ContractTemplate certTemplate() {
    ContractTemplate t;
    t.id = kCertTemplateId;
    t.version = "1";
    t.handler = certHandler();
    return t;
}

/// Identical behavior under a different code hash; clients pinned to the
/// real template must refuse contracts built from this one.
inline ContractTemplate certAltTemplate() {
    ContractTemplate t;
    t.id = kCertAltTemplateId;
    t.version = "1";
    t.handler = certHandler();
    return t;
}

inline Digest certCodeHash() { return certTemplate().codeHash(); }

/// A ready chain: the policy contract sits at its fixed address with the
/// config's trusted CAs installed, and all templates are registered.
inline Chain makeChain(const ChainConfig& cfg) {
    std::vector<std::pair<Address, Bytes>> cas;
    for (const Bytes& pub : cfg.trustedCaPubs) cas.emplace_back(addressOfPubKey(pub), pub);
    std::sort(cas.begin(), cas.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    cas.erase(std::unique(cas.begin(), cas.end(),
                          [](const auto& a, const auto& b) { return a.first == b.first; }),
              cas.end());

    GenesisAlloc pol;
    pol.addr = policyContractAddress();
    pol.codeHash = policyTemplate().codeHash();
    ByteWriter list;
    for (const auto& [addr, pub] : cas) {
        pol.slots.push_back({trustedSlot(addr), pub});
        list.raw(addr);
    }
    pol.slots.push_back({"trustedList", list.take()});

    Chain c(cfg, {pol});
    c.registerTemplate(certTemplate());
    c.registerTemplate(certAltTemplate());
    c.registerTemplate(policyTemplate());
    return c;
}

inline PolicyView readPolicy(const Chain& c, const std::string& name) {
    return policyViewFrom(
        [&](const std::string& l) { return c.storageValue(policyContractAddress(), l); }, name);
}

}  // namespace smartcert
