#pragma once

#include <chrono>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "client.hpp"

namespace smartcert {

class ScenarioParseError : public std::runtime_error {
public:
    explicit ScenarioParseError(const std::string& what) : std::runtime_error(what) {}
};

class AssertionFailed : public std::runtime_error {
public:
    AssertionFailed(std::string actionId, const std::string& what)
        : std::runtime_error(actionId + ": " + what), actionId(std::move(actionId)) {}
    std::string actionId;
};

/// One timed step of a scenario. The verb decides which of the free-form
/// fields are read; unknown verbs fail the parse.
struct ScenarioAction {
    std::string id;
    uint64_t at = 0;
    std::string verb;
    nlohmann::json fields;
};

/// Parsed scenario file: chain parameters, the cast, and a timeline sorted
/// by time. Everything downstream is derived deterministically from `seed`.
struct Scenario {
    uint64_t seed = 0;
    ChainConfig cfg;
    std::vector<std::string> cas;
    struct DomainDecl {
        std::string name;
        size_t keyCount = 1;
        std::vector<std::string> cas;
    };
    std::vector<DomainDecl> domains;
    std::vector<std::string> clients;
    std::vector<std::string> actors;  // untrusted extras for attack scripts
    std::vector<ScenarioAction> timeline;

    static Scenario parse(const nlohmann::json& j);
    static Scenario fromFile(const std::string& path);
};

inline const std::set<std::string>& scenarioVerbs() {
    static const std::set<std::string> verbs{
        "advance_time", "mine",          "register_policy", "replace_policy",
        "create_cert",  "ca_probe",      "revoke",          "client_verify",
        "assert_storage", "refresh",
    };
    return verbs;
}

inline Scenario Scenario::parse(const nlohmann::json& j) {
    try {
        Scenario sc;
        sc.seed = j.value("seed", uint64_t(0));
        const nlohmann::json& c = j.at("config");
        sc.cfg.blockInterval = c.value("blockInterval", uint64_t(15));
        sc.cfg.epoch = c.value("epoch", uint64_t(21600));
        sc.cfg.maxStale = c.value("maxStale", uint64_t(86400));
        sc.cfg.hashWindow = c.value("hashWindow", uint64_t(256));
        sc.cfg.schemeName = c.value("scheme", std::string("testsig"));
        sc.cfg.revokeQuorum = c.value("revokeQuorum", false);
        for (const auto& ca : j.at("cas")) sc.cas.push_back(ca.get<std::string>());
        for (const auto& d : j.value("domains", nlohmann::json::array())) {
            DomainDecl decl;
            decl.name = d.at("name").get<std::string>();
            decl.keyCount = d.value("keyCount", size_t(1));
            if (d.contains("cas"))
                for (const auto& ca : d["cas"]) decl.cas.push_back(ca.get<std::string>());
            else
                decl.cas = sc.cas;
            sc.domains.push_back(std::move(decl));
        }
        for (const auto& cl : j.value("clients", nlohmann::json::array()))
            sc.clients.push_back(cl.get<std::string>());
        for (const auto& a : j.value("actors", nlohmann::json::array()))
            sc.actors.push_back(a.get<std::string>());

        uint64_t prev = 0;
        size_t idx = 0;
        for (const auto& a : j.at("timeline")) {
            ScenarioAction act;
            act.at = a.at("at").get<uint64_t>();
            act.verb = a.at("do").get<std::string>();
            act.fields = a;
            act.id = a.value("id", "#" + std::to_string(idx) + ":" + act.verb + "@" +
                                       std::to_string(act.at));
            if (!scenarioVerbs().count(act.verb))
                throw ScenarioParseError("unknown verb: " + act.verb);
            if (act.at < prev)
                throw ScenarioParseError("timeline not sorted at " + act.id);
            prev = act.at;
            sc.timeline.push_back(std::move(act));
            idx++;
        }
        return sc;
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioParseError(e.what());
    }
}

inline Scenario Scenario::fromFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioParseError("cannot open " + path);
    try {
        return parse(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioParseError(path + ": " + e.what());
    }
}

struct ActionOutcome {
    std::string id;
    uint64_t at = 0;
    std::string verb;
    bool ok = true;
    std::string detail;
    std::vector<std::string> events;
};

struct VerdictRecord {
    uint64_t at = 0;
    std::string client;
    std::string domain;
    std::string verdict;
};

struct Report {
    bool ok = true;
    std::string failedAction;
    std::vector<ActionOutcome> actions;
    std::vector<VerdictRecord> verdicts;
    nlohmann::json finalState;
    size_t certificateBytes = 0;
    uint64_t probeCount = 0;
    uint64_t blockCount = 0;
    std::vector<double> verifyLatencyMs;  // wall clock, excluded from determinism
    Digest chainDumpHash;

    nlohmann::json toJson() const {
        nlohmann::json j;
        j["ok"] = ok;
        if (!ok) j["failedAction"] = failedAction;
        j["actions"] = nlohmann::json::array();
        for (const ActionOutcome& a : actions) {
            nlohmann::json e{{"id", a.id}, {"at", a.at}, {"do", a.verb}, {"ok", a.ok}};
            if (!a.detail.empty()) e["detail"] = a.detail;
            if (!a.events.empty()) e["events"] = a.events;
            j["actions"].push_back(std::move(e));
        }
        j["verdicts"] = nlohmann::json::array();
        for (const VerdictRecord& v : verdicts)
            j["verdicts"].push_back(
                {{"at", v.at}, {"client", v.client}, {"domain", v.domain}, {"verdict", v.verdict}});
        j["finalState"] = finalState;
        nlohmann::json m;
        m["certificateBytes"] = certificateBytes;
        m["probeCount"] = probeCount;
        m["blockCount"] = blockCount;
        if (!verifyLatencyMs.empty()) {
            std::vector<double> s = verifyLatencyMs;
            std::sort(s.begin(), s.end());
            m["verifyLatencyMs"] = {{"min", s.front()},
                                    {"max", s.back()},
                                    {"avg", std::accumulate(s.begin(), s.end(), 0.0) / s.size()},
                                    {"median", s[s.size() / 2]}};
        }
        j["metrics"] = std::move(m);
        j["chainDumpSha256"] = chainDumpHash.hex();
        return j;
    }
};

/// Drives one scenario against a fresh chain. Execution is single-threaded;
/// simulated time moves only through the timeline, with blocks mined on the
/// configured cadence between actions and immediately for actions that carry
/// transactions.
class ScenarioRunner {
public:
    explicit ScenarioRunner(Scenario sc) : sc_(std::move(sc)), rng_(seededRng(sc_.seed, "scenario")) {
        const SigScheme& scheme = schemeByName(sc_.cfg.schemeName);
        ChainConfig cfg = sc_.cfg;
        for (size_t i = 0; i < sc_.cas.size(); i++) {
            Party ca = makeParty(scheme, 1000 + i, "ca");
            cfg.trustedCaPubs.push_back(ca.keys.pub);
            cast_[sc_.cas[i]] = ca;
        }
        for (size_t i = 0; i < sc_.domains.size(); i++) {
            Domain d;
            d.decl = sc_.domains[i];
            d.owner = makeParty(scheme, 2000 + i, "owner");
            for (size_t k = 0; k < d.decl.keyCount; k++) {
                auto r = seededRng(3000 + 16 * i + k, "tls");
                d.tls.push_back(scheme.generate(r));
            }
            cast_[d.decl.name + "/owner"] = d.owner;
            domains_[d.decl.name] = std::move(d);
        }
        for (size_t i = 0; i < sc_.actors.size(); i++)
            cast_[sc_.actors[i]] = makeParty(scheme, 4000 + i, "actor");
        mitm_ = makeParty(scheme, 5000, "mitm");

        chain_.emplace(makeChain(cfg));
        // Clients keep a little slack past the staleness bound so an aged
        // certificate reads STALE rather than falling out of the header
        // window at the same instant.
        uint64_t horizon = sc_.cfg.maxStale + 10 * sc_.cfg.blockInterval;
        for (const std::string& cl : sc_.clients) {
            clients_.emplace(cl, HeaderStore(horizon));
            clients_.at(cl).seed(chain_->headerAt(0));
        }
    }

    Report run() {
        for (const ScenarioAction& a : sc_.timeline) {
            ActionOutcome out;
            out.id = a.id;
            out.at = a.at;
            out.verb = a.verb;
            try {
                step(a, out);
            } catch (const ScenarioParseError&) {
                throw;
            } catch (const std::exception& e) {
                out.ok = false;
                out.detail = e.what();
            }
            report_.actions.push_back(out);
            if (!out.ok) {
                report_.ok = false;
                report_.failedAction = a.id;
                break;
            }
        }
        finishReport();
        return report_;
    }

    const Chain& chain() const { return *chain_; }

private:
    struct Party {
        KeyPair keys;
        Address addr;
    };
    struct Domain {
        Scenario::DomainDecl decl;
        Party owner;
        std::vector<KeyPair> tls;
        Address cert;
        bool created = false;
        Bytes staple;
    };

    static Party makeParty(const SigScheme& scheme, uint64_t seed, const std::string& label) {
        Party p;
        auto r = seededRng(seed, label);
        p.keys = scheme.generate(r);
        p.addr = p.keys.address();
        return p;
    }

    const Party& party(const std::string& label) {
        auto it = cast_.find(label);
        if (it == cast_.end()) throw ScenarioParseError("unknown actor: " + label);
        return it->second;
    }

    Domain& domain(const std::string& name) {
        auto it = domains_.find(name);
        if (it == domains_.end()) throw ScenarioParseError("unknown domain: " + name);
        return it->second;
    }

    /// Mines cadence blocks up to (and excluding) t, then moves the clock.
    void advanceTo(uint64_t t) {
        while (chain_->head().timestamp + sc_.cfg.blockInterval < t)
            chain_->mineBlock(chain_->head().timestamp + sc_.cfg.blockInterval);
        if (t > clock_) clock_ = t;
    }

    /// Seals the given transaction in its own block stamped with the action
    /// time (nudged forward if a cadence block already owns it).
    Receipt exec(Transaction tx) {
        Digest id = chain_->enqueueUnchecked(std::move(tx));
        uint64_t ts = std::max(clock_, chain_->head().timestamp + 1);
        chain_->mineBlock(ts);
        auto r = chain_->receiptOf(id);
        if (!r) throw std::logic_error("transaction vanished");
        return *r;
    }

    Transaction call(const Party& from, const Address& target, const std::string& method,
                     Bytes args) {
        Transaction tx;
        tx.senderPubKey = from.keys.pub;
        tx.nonce = chain_->nonceOf(from.addr);
        tx.kind = Transaction::Kind::Call;
        tx.target = target;
        tx.method = method;
        tx.args = std::move(args);
        tx.signature = chain_->scheme().sign(from.keys.priv, tx.signedBytes());
        return tx;
    }

    /// Checks a receipt against the action's "expect" field ("ok" by
    /// default, or "revert:REASON").
    void expectReceipt(const nlohmann::json& f, const Receipt& r, ActionOutcome& out) {
        for (const Event& e : r.events) out.events.push_back(e.name);
        std::string want = f.value("expect", std::string("ok"));
        if (want == "ok") {
            if (r.status != Receipt::Status::Ok)
                throw AssertionFailed(out.id, "expected ok, got revert: " + r.revertReason);
        } else if (want.rfind("revert:", 0) == 0) {
            std::string reason = want.substr(7);
            if (r.status != Receipt::Status::Reverted || r.revertReason != reason)
                throw AssertionFailed(out.id, "expected revert " + reason + ", got " +
                                                  (r.status == Receipt::Status::Ok
                                                       ? std::string("ok")
                                                       : r.revertReason));
        } else {
            throw ScenarioParseError("bad expect: " + want);
        }
        if (f.contains("expect_event")) {
            std::string ev = f["expect_event"].get<std::string>();
            bool found = false;
            for (const Event& e : r.events) found = found || e.name == ev;
            if (!found) throw AssertionFailed(out.id, "expected event " + ev);
        }
    }

    void step(const ScenarioAction& a, ActionOutcome& out) {
        const nlohmann::json& f = a.fields;
        advanceTo(a.at);

        if (a.verb == "advance_time") {
            // Cadence blocks only; the inclusive edge is minable too.
            if (chain_->head().timestamp + sc_.cfg.blockInterval == a.at) chain_->mineBlock(a.at);
            return;
        }
        if (a.verb == "mine") {
            chain_->mineBlock(std::max(clock_, chain_->head().timestamp + 1));
            return;
        }
        if (a.verb == "create_cert") return doCreate(f, out);
        if (a.verb == "register_policy" || a.verb == "replace_policy") return doPolicy(f, out);
        if (a.verb == "ca_probe") return doProbe(f, out);
        if (a.verb == "revoke") return doRevoke(f, out);
        if (a.verb == "client_verify") return doVerify(f, out);
        if (a.verb == "assert_storage") return doAssert(f, out);
        if (a.verb == "refresh") return doRefresh(f, out);
        throw ScenarioParseError("unknown verb: " + a.verb);
    }

    void doCreate(const nlohmann::json& f, ActionOutcome& out) {
        Domain& d = domain(f.at("domain").get<std::string>());
        std::vector<std::string> caLabels = d.decl.cas;
        if (f.contains("cas")) {
            caLabels.clear();
            for (const auto& c : f["cas"]) caLabels.push_back(c.get<std::string>());
        }
        std::vector<Address> cas;
        for (const std::string& l : caLabels) cas.push_back(party(l).addr);
        std::vector<Bytes> keys;
        for (const KeyPair& k : d.tls) keys.push_back(k.pub);

        Transaction tx;
        tx.senderPubKey = d.owner.keys.pub;
        tx.nonce = chain_->nonceOf(d.owner.addr);
        tx.kind = Transaction::Kind::Create;
        tx.templateId = kCertTemplateId;
        tx.args = buildCertInitArgs(d.decl.name, policyContractAddress(), keys, cas);
        tx.signature = chain_->scheme().sign(d.owner.keys.priv, tx.signedBytes());
        Address addr = Chain::contractAddress(d.owner.addr, tx.nonce);
        Receipt r = exec(std::move(tx));
        expectReceipt(f, r, out);
        if (r.status == Receipt::Status::Ok) {
            d.cert = addr;
            d.created = true;
            d.staple = assembleCertificate(*chain_, addr).serialize();
            report_.certificateBytes = std::max(report_.certificateBytes, d.staple.size());
        }
    }

    void doPolicy(const nlohmann::json& f, ActionOutcome& out) {
        Domain& d = domain(f.at("domain").get<std::string>());
        PolicyDoc doc;
        doc.type = f.value("type", std::string("new")) == "update" ? PolicyDoc::Type::Update
                                                                   : PolicyDoc::Type::New;
        // "keyid" picks the management key: true binds the domain owner,
        // false leaves it unset, a label binds that actor's address.
        nlohmann::json key = f.value("keyid", nlohmann::json(true));
        if (key.is_string())
            doc.keyId = party(key.get<std::string>()).addr;
        else if (key.get<bool>())
            doc.keyId = d.owner.addr;
        std::vector<std::string> caLabels = d.decl.cas;
        if (f.contains("cas")) {
            caLabels.clear();
            for (const auto& c : f["cas"]) caLabels.push_back(c.get<std::string>());
        }
        for (const std::string& l : caLabels) doc.cas.push_back(party(l).addr);
        doc.maxLifetime = f.value("maxLifetime", kDefaultMaxLifetime);
        if (f.contains("maxErr")) doc.maxErr = f["maxErr"].get<uint64_t>();
        doc.minCAs = f.value("minCAs", 1u);

        Bytes msg = policySignMessage(d.decl.name, doc);
        std::vector<std::pair<Address, Bytes>> sigs;
        for (const auto& s : f.value("signers", nlohmann::json::array())) {
            const Party& p = party(s.get<std::string>());
            sigs.emplace_back(p.addr, chain_->scheme().sign(p.keys.priv, msg));
        }
        const Party& sender =
            f.contains("submit_as") ? party(f["submit_as"].get<std::string>()) : d.owner;
        Receipt r = exec(call(sender, policyContractAddress(), "newPolicy",
                              buildNewPolicyArgs(d.decl.name, doc, std::move(sigs))));
        expectReceipt(f, r, out);
    }

    void doProbe(const nlohmann::json& f, ActionOutcome& out) {
        Domain& d = domain(f.at("domain").get<std::string>());
        const Party& ca = party(f.at("ca").get<std::string>());

        ValidationProof proof;
        if (f.contains("replay_from")) {
            auto it = proofs_.find(f["replay_from"].get<std::string>());
            if (it == proofs_.end())
                throw ScenarioParseError("no captured proof: " +
                                         f["replay_from"].get<std::string>());
            proof = it->second;
        } else {
            proof.cliRnd = makeCliRnd(ca.addr, chain_->headHash());
            proof.srvRnd = makeSrvRnd(clock_, rng_);
            proof.params = makeDhParams(rng_);
            const Bytes* signKey = &d.tls[f.value("key_index", size_t(0))].priv;
            if (f.contains("mitm_by")) signKey = &party(f["mitm_by"].get<std::string>()).keys.priv;
            else if (f.value("wrong_key", false)) signKey = &mitm_.keys.priv;
            proof.sig = chain_->scheme().sign(
                *signKey, validationMessage(proof.cliRnd, proof.srvRnd, proof.params));
        }
        if (f.contains("label")) proofs_[f["label"].get<std::string>()] = proof;
        report_.probeCount++;

        uint64_t hold = f.value("hold_seconds", uint64_t(0));
        if (hold > 0) advanceTo(clock_ + hold);
        const Party& sender =
            f.contains("submit_as") ? party(f["submit_as"].get<std::string>()) : ca;
        Receipt r = exec(call(sender, d.cert, "update", proof.serialize()));
        expectReceipt(f, r, out);
    }

    void doRevoke(const nlohmann::json& f, ActionOutcome& out) {
        Domain& d = domain(f.at("domain").get<std::string>());
        std::string by = f.at("by").get<std::string>();
        const Party& sender = by == "keyid" ? d.owner : party(by);
        Receipt r = exec(call(sender, d.cert, "revoke", {}));
        expectReceipt(f, r, out);
    }

    void doRefresh(const nlohmann::json& f, ActionOutcome&) {
        Domain& d = domain(f.at("domain").get<std::string>());
        d.staple = assembleCertificate(*chain_, d.cert).serialize();
        report_.certificateBytes = std::max(report_.certificateBytes, d.staple.size());
        if (f.contains("label")) staples_[f["label"].get<std::string>()] = d.staple;
    }

    void doVerify(const nlohmann::json& f, ActionOutcome& out) {
        Domain& d = domain(f.at("domain").get<std::string>());
        std::string clientName = f.value("client", sc_.clients.empty() ? "" : sc_.clients[0]);
        auto it = clients_.find(clientName);
        if (it == clients_.end()) throw ScenarioParseError("unknown client: " + clientName);
        HeaderStore& store = it->second;
        for (;;) {
            std::vector<BlockHeader> batch = chain_->headersAfter(store.tipNumber(), 4096);
            if (batch.empty()) break;
            syncHeaders(store, batch);
        }

        const Bytes* staple = &d.staple;
        if (f.contains("staple_from")) {
            auto s = staples_.find(f["staple_from"].get<std::string>());
            if (s == staples_.end())
                throw ScenarioParseError("no captured staple: " +
                                         f["staple_from"].get<std::string>());
            staple = &s->second;
        }
        std::string name = f.value("name", d.decl.name);
        TrustAnchors anchors{certCodeHash(), sc_.cfg.maxStale};

        auto t0 = std::chrono::steady_clock::now();
        VerifyResult v = verifyCertBytes(name, *staple, clock_, store, anchors);
        auto t1 = std::chrono::steady_clock::now();
        report_.verifyLatencyMs.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());

        report_.verdicts.push_back({clock_, clientName, d.decl.name, verdictName(v.verdict)});
        out.detail = verdictName(v.verdict);
        std::string want = f.at("expect").get<std::string>();
        if (want != verdictName(v.verdict))
            throw AssertionFailed(out.id,
                                  "expected " + want + ", got " + verdictName(v.verdict));
    }

    void doAssert(const nlohmann::json& f, ActionOutcome& out) {
        if (f.contains("policy")) {
            PolicyView pv = readPolicy(*chain_, f["policy"].get<std::string>());
            std::string field = f.at("field").get<std::string>();
            uint64_t got;
            if (field == "registered") got = pv.registered ? 1 : 0;
            else if (field == "sigNo") got = pv.sigNo;
            else if (field == "minCAs") got = pv.doc.minCAs;
            else if (field == "maxLifetime") got = pv.doc.maxLifetime;
            else throw ScenarioParseError("unknown policy field: " + field);
            uint64_t want = f.at("equals").get<uint64_t>();
            if (got != want)
                throw AssertionFailed(out.id, field + " = " + std::to_string(got) +
                                                  ", expected " + std::to_string(want));
            return;
        }

        Domain& d = domain(f.at("domain").get<std::string>());
        std::string slot = f.at("slot").get<std::string>();
        // "ca:<label>:field" addresses a tracked CA's record by cast label.
        if (slot.rfind("ca:", 0) == 0) {
            size_t sep = slot.find(':', 3);
            if (sep != std::string::npos) {
                std::string label = slot.substr(3, sep - 3);
                slot = caField(party(label).addr, slot.substr(sep + 1));
            }
        }
        std::optional<Bytes> v = chain_->storageValue(d.cert, slot);
        if (f.value("absent", false)) {
            if (v && !v->empty())
                throw AssertionFailed(out.id, slot + " unexpectedly present");
            return;
        }
        if (!v) throw AssertionFailed(out.id, slot + " missing");
        if (f.contains("equals_hex")) {
            std::string want = f["equals_hex"].get<std::string>();
            if (toHex(*v) != want)
                throw AssertionFailed(out.id, slot + " = " + toHex(*v) + ", expected " + want);
            return;
        }
        uint64_t want = f.at("equals").get<uint64_t>();
        uint64_t got = wordValue(*v);
        if (got != want)
            throw AssertionFailed(out.id, slot + " = " + std::to_string(got) + ", expected " +
                                              std::to_string(want));
    }

    void finishReport() {
        report_.blockCount = chain_->sealedCount();
        nlohmann::json fs;
        for (const auto& [name, d] : domains_) {
            if (!d.created) continue;
            nlohmann::json e;
            e["contract"] = d.cert.hex();
            try {
                CertState st = readCertState(
                    [&](const std::string& l) { return chain_->storageValue(d.cert, l); });
                e["valid"] = st.valid;
                e["revoked"] = st.revoked;
                e["created"] = st.created;
                e["updated"] = st.updated;
                nlohmann::json cas;
                for (const Address& ca : st.cas) {
                    const CertState::CaState& s = st.s.at(ca);
                    cas[ca.hex()] = {
                        {"lastUpd", s.lastUpd}, {"lastErr", s.lastErr}, {"errNo", s.errNo}};
                }
                e["cas"] = std::move(cas);
                e["revocations"] = st.revs.size();
            } catch (const DecodeError& err) {
                e["decodeError"] = err.what();
            }
            fs[name] = std::move(e);
        }
        report_.finalState = std::move(fs);

        std::ostringstream dump;
        chain_->dump(dump);
        report_.chainDumpHash = sha256(dump.str());
    }

    Scenario sc_;
    std::mt19937_64 rng_;
    std::optional<Chain> chain_;
    Party mitm_;
    std::map<std::string, Party> cast_;
    std::map<std::string, Domain> domains_;
    std::map<std::string, HeaderStore> clients_;
    std::map<std::string, ValidationProof> proofs_;
    std::map<std::string, Bytes> staples_;
    uint64_t clock_ = 0;
    Report report_;
};

inline Report runScenario(Scenario sc) { return ScenarioRunner(std::move(sc)).run(); }

inline Report runScenarioFile(const std::string& path) {
    return runScenario(Scenario::fromFile(path));
}

}  // namespace smartcert
