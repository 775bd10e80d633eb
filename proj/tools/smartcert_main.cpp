#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "smartcert/bench.hpp"
#include "smartcert/scenario.hpp"

using namespace smartcert;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 2;
constexpr int kExitParse = 3;

Bytes readFileBytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// Accepts either raw binary or a hex dump with optional whitespace, so
/// certificates and proofs round-trip through text files.
Bytes readBytesMaybeHex(const std::string& path) {
    Bytes raw = readFileBytes(path);
    std::string text;
    for (uint8_t b : raw) {
        if (std::isspace(b)) continue;
        if (!std::isxdigit(b)) return raw;
        text.push_back(static_cast<char>(b));
    }
    if (text.empty() || text.size() % 2 != 0) return raw;
    auto decoded = fromHex(text);
    return decoded ? *decoded : raw;
}

Address parseAddress(const std::string& hex) {
    auto a = Address::fromHex(hex);
    if (!a) throw ScenarioParseError("malformed address: " + hex);
    return *a;
}

Chain loadChainFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return Chain::load(in, [](const ChainConfig& cfg) { return makeChain(cfg); });
}

nlohmann::json eventJson(const Event& ev) {
    nlohmann::json f = nlohmann::json::object();
    for (const auto& [k, v] : ev.fields) f[k] = v;
    return {{"contract", ev.contract.hex()}, {"name", ev.name}, {"fields", std::move(f)}};
}

// -- run ---------------------------------------------------------------------

int cmdRun(const std::string& scenarioPath, const std::string& reportPath) {
    Report r = runScenarioFile(scenarioPath);
    if (!reportPath.empty()) {
        std::ofstream out(reportPath);
        if (!out) throw std::runtime_error("cannot write " + reportPath);
        out << r.toJson().dump(2) << "\n";
    }
    size_t okActions = 0;
    for (const ActionOutcome& a : r.actions)
        if (a.ok) okActions++;
    std::cout << "actions: " << okActions << "/" << r.actions.size() << " ok\n";
    for (const VerdictRecord& v : r.verdicts)
        std::cout << "verdict t=" << v.at << " " << v.client << " " << v.domain << " " << v.verdict
                  << "\n";
    std::cout << "blocks: " << r.blockCount << "  probes: " << r.probeCount
              << "  certificate: " << r.certificateBytes << " bytes\n";
    std::cout << "chain sha256: " << r.chainDumpHash.hex() << "\n";
    if (!r.ok) {
        const ActionOutcome& failed = r.actions.back();
        std::cerr << "action " << failed.id << " (" << failed.verb << " at t=" << failed.at
                  << ") failed: " << failed.detail << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

// -- bench -------------------------------------------------------------------

int cmdBenchProbe(unsigned endpoints, unsigned parallelism, double seconds, uint64_t epoch) {
    ProbeBench p = benchProbe(endpoints, parallelism, seconds);
    std::cout << "handshakes: " << p.handshakes << "  failures: " << p.failures << "\n";
    std::cout << "elapsed: " << p.seconds << " s  rate: " << p.perSecond << "/s\n";
    std::cout << "endpoints: " << p.endpoints << "  parallelism: " << p.parallelism << "\n";
    std::cout << "capacity: " << static_cast<uint64_t>(p.perSecond * static_cast<double>(epoch))
              << " validations per " << epoch << " s epoch\n";
    return kExitOk;
}

int cmdBenchVerify(unsigned iterations) {
    VerifyBench v = benchVerify(iterations);
    auto line = [](const char* label, const LatencyStats& s) {
        std::cout << label << "  min " << s.minMs << " ms  max " << s.maxMs << " ms  avg "
                  << s.avgMs << " ms  median " << s.medianMs << " ms\n";
    };
    std::cout << "certificate: " << v.certificateBytes << " bytes  iterations: "
              << v.accepted.samples << "\n";
    line("accepted", v.accepted);
    line("rejected", v.rejected);
    return kExitOk;
}

// -- chain -------------------------------------------------------------------

int cmdChainDump(const std::string& scenarioPath, const std::string& outPath,
                 const std::string& receiptsPath, const std::string& certsDir) {
    ScenarioRunner runner(Scenario::fromFile(scenarioPath));
    Report r = runner.run();
    if (!r.ok) {
        std::cerr << "scenario failed at action " << r.failedAction << ": "
                  << r.actions.back().detail << "\n";
        return kExitFailure;
    }
    const Chain& chain = runner.chain();

    if (outPath.empty()) {
        chain.dump(std::cout);
    } else {
        std::ofstream out(outPath, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + outPath);
        chain.dump(out);
        std::cerr << "wrote " << chain.sealedCount() << " blocks to " << outPath << "\n";
    }

    if (!receiptsPath.empty()) {
        std::ofstream out(receiptsPath);
        if (!out) throw std::runtime_error("cannot write " + receiptsPath);
        for (uint64_t b = 1; b < chain.sealedCount(); b++) {
            for (const Receipt& rc : chain.receiptsAt(b)) {
                nlohmann::json j{{"block", b},
                                 {"tx", rc.txId.hex()},
                                 {"status", Receipt::statusName(rc.status)}};
                if (!rc.revertReason.empty()) j["revertReason"] = rc.revertReason;
                if (rc.createdContract) j["createdContract"] = rc.createdContract->hex();
                j["events"] = nlohmann::json::array();
                for (const Event& ev : rc.events) j["events"].push_back(eventJson(ev));
                out << j.dump() << "\n";
            }
        }
    }

    if (!certsDir.empty()) {
        std::filesystem::create_directories(certsDir);
        for (const auto& [name, st] : r.finalState.items()) {
            Address addr = parseAddress(st.at("contract").get<std::string>());
            Bytes cert = assembleCertificate(chain, addr).serialize();
            std::string path = certsDir + "/" + name + ".cert";
            std::ofstream out(path);
            if (!out) throw std::runtime_error("cannot write " + path);
            out << toHex(cert) << "\n";
            std::cerr << "wrote " << name << " certificate (" << cert.size() << " bytes, contract "
                      << addr.hex() << ")\n";
        }
    }
    return kExitOk;
}

int cmdChainLoad(const std::string& logPath) {
    Chain chain = loadChainFile(logPath);
    std::cout << "blocks: " << chain.sealedCount() << "\n";
    std::cout << "head: " << chain.headHash().hex() << " at t=" << chain.head().timestamp << "\n";
    std::cout << "state root: " << chain.head().stateRoot.hex() << "\n";
    return kExitOk;
}

// -- contract ----------------------------------------------------------------

int cmdContractInspect(const std::string& addrHex, const std::string& logPath) {
    Address addr = parseAddress(addrHex);
    Chain chain = loadChainFile(logPath);
    if (!chain.account(addr)) {
        std::cerr << "no contract at " << addr.hex() << "\n";
        return kExitFailure;
    }
    CertState st = readCertState([&](const std::string& l) { return chain.storageValue(addr, l); });
    nlohmann::json j;
    j["contract"] = addr.hex();
    j["name"] = st.name;
    j["nameHash"] = st.nameHash.hex();
    j["policy"] = st.policyAddr.hex();
    j["publicKeys"] = nlohmann::json::array();
    for (const Bytes& pk : st.pks) j["publicKeys"].push_back(toHex(pk));
    j["created"] = st.created;
    j["updated"] = st.updated;
    j["revoked"] = st.revoked;
    j["valid"] = st.valid;
    nlohmann::json cas = nlohmann::json::object();
    for (const Address& ca : st.cas) {
        const CertState::CaState& s = st.s.at(ca);
        cas[ca.hex()] = {{"lastUpd", s.lastUpd}, {"lastErr", s.lastErr}, {"errNo", s.errNo}};
    }
    j["cas"] = std::move(cas);
    j["revocations"] = nlohmann::json::array();
    for (const Address& ca : st.revs) j["revocations"].push_back(ca.hex());
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

// -- client ------------------------------------------------------------------

int cmdClientVerify(const std::string& certPath, const std::string& name,
                    const std::string& headersPath, uint64_t now) {
    Bytes cert = readBytesMaybeHex(certPath);
    std::ifstream in(headersPath, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + headersPath);
    Chain::LoadedLog log = Chain::parseLog(in);

    HeaderStore store(log.config.maxStale + 10 * log.config.blockInterval);
    store.seed(log.blocks.front().header);
    for (size_t i = 1; i < log.blocks.size(); i++) store.append(log.blocks[i].header);

    TrustAnchors anchors{certCodeHash(), log.config.maxStale};
    VerifyResult r = verifyCertBytes(name, cert, now, store, anchors);
    std::cout << verdictName(r.verdict) << "\n";
    return r.verdict == Verdict::Ok ? kExitOk : kExitFailure;
}

// -- handshake ---------------------------------------------------------------

int cmdHandshakeProbe(uint16_t port, uint64_t caSeed, const std::string& schemeName,
                      const std::string& logPath, const std::string& outPath) {
    std::ifstream in(logPath, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + logPath);
    Chain::LoadedLog log = Chain::parseLog(in);
    Digest anchor = log.blocks.back().header.hash();

    const SigScheme& scheme = schemeByName(schemeName);
    auto rng = seededRng(caSeed, "ca");
    Address caAddr = scheme.generate(rng).address();

    ValidationProof p = caProbe(port, caAddr, anchor);
    std::string hex = toHex(p.serialize());
    if (outPath.empty()) {
        std::cout << hex << "\n";
    } else {
        std::ofstream out(outPath);
        if (!out) throw std::runtime_error("cannot write " + outPath);
        out << hex << "\n";
    }
    std::cerr << "probe as CA " << caAddr.hex() << " anchored at block "
              << log.blocks.back().header.number << "\n";
    return kExitOk;
}

// -- domain ------------------------------------------------------------------

int cmdDomainRun(const std::string& configPath, uint64_t duration) {
    std::ifstream in(configPath);
    if (!in) throw std::runtime_error("cannot open " + configPath);
    nlohmann::json cfg;
    try {
        cfg = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioParseError(configPath + ": " + e.what());
    }

    Chain chain = loadChainFile(cfg.at("chain").get<std::string>());
    Address cert = parseAddress(cfg.at("contract").get<std::string>());
    uint64_t period = cfg.value("refreshPeriod", chain.config().epoch / 2);
    const SigScheme& scheme = schemeByName(cfg.value("scheme", std::string("testsig")));

    Bytes tlsPriv;
    if (cfg.contains("tlsKeyFile")) {
        tlsPriv = readBytesMaybeHex(cfg.at("tlsKeyFile").get<std::string>());
    } else {
        auto rng = seededRng(cfg.at("tlsSeed").get<uint64_t>(), "tls");
        tlsPriv = scheme.generate(rng).priv;
    }

    auto wallClock = [] {
        return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                         std::chrono::system_clock::now().time_since_epoch())
                                         .count());
    };
    HandshakeServer server(scheme, tlsPriv, wallClock, cfg.value("seed", uint64_t{1}));
    DomainAgent agent(chain, cert, server, period);
    agent.refresh();
    uint16_t port = server.start(cfg.value("listen", uint16_t{0}));

    CertState st = readCertState([&](const std::string& l) { return chain.storageValue(cert, l); });
    std::cout << "serving " << st.name << " on port " << port << " (refresh every " << period
              << " s)\n"
              << std::flush;

    uint64_t served = 0;
    while (duration == 0 || served < duration) {
        std::this_thread::sleep_for(std::chrono::seconds(1));
        agent.tick(wallClock());
        served++;
    }
    server.stop();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"certificate lifecycle tools: scenarios, chain logs, probes, verification"};
    app.require_subcommand(1);

    std::string scenarioPath, reportPath;
    auto* run = app.add_subcommand("run", "execute a scenario file and report the outcome");
    run->add_option("scenario", scenarioPath, "scenario JSON file")->required();
    run->add_option("--report", reportPath, "write the full JSON report here");

    unsigned benchEndpoints = 100, benchParallelism = 32, benchIterations = 200;
    double benchSeconds = 10.0;
    uint64_t benchEpoch = 21600;
    auto* bench = app.add_subcommand("bench", "measure probe throughput or verify latency");
    bench->require_subcommand(1);
    auto* benchProbeCmd = bench->add_subcommand("probe", "loopback handshake probe throughput");
    benchProbeCmd->add_option("--endpoints", benchEndpoints, "loopback servers to spawn");
    benchProbeCmd->add_option("--parallelism", benchParallelism, "probe worker threads");
    benchProbeCmd->add_option("--seconds", benchSeconds, "measurement window");
    benchProbeCmd->add_option("--epoch", benchEpoch, "epoch length for the capacity line");
    auto* benchVerifyCmd = bench->add_subcommand("verify", "certificate verification latency");
    benchVerifyCmd->add_option("--iterations", benchIterations, "timed verifications per path");

    std::string dumpScenario, dumpOut, dumpReceipts, dumpCertsDir, loadLog;
    auto* chain = app.add_subcommand("chain", "chain log tools");
    chain->require_subcommand(1);
    auto* chainDump = chain->add_subcommand("dump", "run a scenario and write its chain log");
    chainDump->add_option("scenario", dumpScenario, "scenario JSON file")->required();
    chainDump->add_option("--out", dumpOut, "log file (default: stdout)");
    chainDump->add_option("--receipts", dumpReceipts, "write receipts as JSON lines");
    chainDump->add_option("--certs-dir", dumpCertsDir,
                          "write each domain's assembled certificate as hex");
    auto* chainLoad = chain->add_subcommand("load", "replay a chain log and verify every header");
    chainLoad->add_option("log", loadLog, "chain log file")->required();

    std::string inspectAddr, inspectLog;
    auto* contract = app.add_subcommand("contract", "contract queries");
    contract->require_subcommand(1);
    auto* inspect = contract->add_subcommand("inspect", "decode a certificate contract's storage");
    inspect->add_option("address", inspectAddr, "contract address (40 hex chars)")->required();
    inspect->add_option("--chain", inspectLog, "chain log file")->required();

    std::string verifyCert, verifyName, verifyHeaders;
    uint64_t verifyNow = 0;
    auto* client = app.add_subcommand("client", "client-side verification");
    client->require_subcommand(1);
    auto* clientVerify = client->add_subcommand("verify", "validate a stapled certificate");
    clientVerify->add_option("--cert", verifyCert, "certificate file (hex or raw)")->required();
    clientVerify->add_option("--name", verifyName, "expected DNS name")->required();
    clientVerify->add_option("--headers", verifyHeaders, "chain log for the header store")
        ->required();
    clientVerify->add_option("--now", verifyNow, "verification time, unix seconds")->required();

    uint16_t probePort = 0;
    uint64_t probeCaSeed = 0;
    std::string probeScheme = "testsig", probeChain, probeOut;
    auto* handshake = app.add_subcommand("handshake", "handshake tools");
    handshake->require_subcommand(1);
    auto* handshakeProbe =
        handshake->add_subcommand("probe", "extract a validation proof from a live endpoint");
    handshakeProbe->add_option("--endpoint", probePort, "loopback port")->required();
    handshakeProbe->add_option("--ca-key", probeCaSeed, "CA key seed")->required();
    handshakeProbe->add_option("--chain", probeChain, "chain log for the anchor hash")->required();
    handshakeProbe->add_option("--scheme", probeScheme, "signature scheme name");
    handshakeProbe->add_option("--out", probeOut, "proof file (default: stdout)");

    std::string domainConfig;
    uint64_t domainDuration = 0;
    auto* domain = app.add_subcommand("domain", "domain-side serving");
    domain->require_subcommand(1);
    auto* domainRun =
        domain->add_subcommand("run", "serve an endpoint with periodic staple refresh");
    domainRun->add_option("--config", domainConfig, "domain config JSON")->required();
    domainRun->add_option("--duration", domainDuration, "seconds to serve (0 = forever)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitParse;
    }

    try {
        if (run->parsed()) return cmdRun(scenarioPath, reportPath);
        if (benchProbeCmd->parsed())
            return cmdBenchProbe(benchEndpoints, benchParallelism, benchSeconds, benchEpoch);
        if (benchVerifyCmd->parsed()) return cmdBenchVerify(benchIterations);
        if (chainDump->parsed())
            return cmdChainDump(dumpScenario, dumpOut, dumpReceipts, dumpCertsDir);
        if (chainLoad->parsed()) return cmdChainLoad(loadLog);
        if (inspect->parsed()) return cmdContractInspect(inspectAddr, inspectLog);
        if (clientVerify->parsed())
            return cmdClientVerify(verifyCert, verifyName, verifyHeaders, verifyNow);
        if (handshakeProbe->parsed())
            return cmdHandshakeProbe(probePort, probeCaSeed, probeScheme, probeChain, probeOut);
        if (domainRun->parsed()) return cmdDomainRun(domainConfig, domainDuration);
    } catch (const ScenarioParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const LoadError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const DecodeError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}
