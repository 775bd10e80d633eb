#pragma once

#include <cstring>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "bytes.hpp"
#include "hash.hpp"
#include "sig.hpp"
#include "trie.hpp"

namespace smartcert {

class ChainError : public std::runtime_error {
public:
    explicit ChainError(const std::string& w) : std::runtime_error(w) {}
};
class BadSignature : public ChainError {
public:
    BadSignature() : ChainError("transaction signature invalid") {}
};
class NonMonotonicTimestamp : public ChainError {
public:
    NonMonotonicTimestamp() : ChainError("block timestamp not after head") {}
};
class OutOfWindow : public ChainError {
public:
    explicit OutOfWindow(uint64_t i) : ChainError("block lookback out of window: " + std::to_string(i)) {}
};
class UnknownAccount : public ChainError {
public:
    explicit UnknownAccount(const std::string& a) : ChainError("unknown account: " + a) {}
};
class UnknownSlot : public ChainError {
public:
    explicit UnknownSlot(const std::string& l) : ChainError("unknown storage slot: " + l) {}
};
class LoadError : public ChainError {
public:
    explicit LoadError(const std::string& w) : ChainError("chain load: " + w) {}
};

/// Raised inside contract handlers to abort the transaction; the engine turns
/// it into a REVERTED receipt and rolls every state effect back.
struct RevertSignal {
    std::string code;
};

struct ChainConfig {
    uint64_t blockInterval = 15;  // seconds of simulated time per block
    uint64_t hashWindow = 256;    // how far back contracts may read block hashes
    uint64_t epoch = 21600;       // validation period
    uint64_t maxStale = 86400;    // client-side freshness bound on certificate state
    bool revokeQuorum = false;    // false: remaining-CA reading; true: quorum-of-revokers
    std::string schemeName = "rsa2048";
    std::vector<Bytes> trustedCaPubs;  // genesis CA registry (public key encodings)

    void validate() const {
        if (blockInterval == 0 || hashWindow == 0 || epoch == 0)
            throw ChainError("config: zero interval");
        if (maxStale <= epoch) throw ChainError("config: maxStale must exceed epoch");
    }

    Bytes serialize() const {
        ByteWriter w;
        w.str("SCRTCH01");
        w.u64(blockInterval);
        w.u64(hashWindow);
        w.u64(epoch);
        w.u64(maxStale);
        w.u8(revokeQuorum ? 1 : 0);
        w.lp16(schemeName);
        w.u16(static_cast<uint16_t>(trustedCaPubs.size()));
        for (const Bytes& pk : trustedCaPubs) w.lp32(pk);
        return w.take();
    }

    static ChainConfig parse(ByteReader& r) {
        if (r.str(8) != "SCRTCH01") throw DecodeError("bad chain log magic");
        ChainConfig c;
        c.blockInterval = r.u64();
        c.hashWindow = r.u64();
        c.epoch = r.u64();
        c.maxStale = r.u64();
        c.revokeQuorum = r.u8() != 0;
        c.schemeName = r.lpstr16();
        uint16_t n = r.u16();
        for (uint16_t i = 0; i < n; i++) c.trustedCaPubs.push_back(r.lp32());
        return c;
    }
};

struct BlockHeader {
    Digest parentHash;
    uint64_t number = 0;
    uint64_t timestamp = 0;
    Digest stateRoot;
    Digest txRoot;

    Bytes serialize() const {
        ByteWriter w;
        w.raw(parentHash);
        w.u64(number);
        w.u64(timestamp);
        w.raw(stateRoot);
        w.raw(txRoot);
        return w.take();
    }
    static BlockHeader parse(ByteReader& r) {
        BlockHeader h;
        h.parentHash = r.fixed<32>();
        h.number = r.u64();
        h.timestamp = r.u64();
        h.stateRoot = r.fixed<32>();
        h.txRoot = r.fixed<32>();
        return h;
    }
    Digest hash() const { return sha256(serialize()); }
    static constexpr size_t kWireSize = 112;

    auto operator<=>(const BlockHeader&) const = default;
};

struct Account {
    uint64_t nonce = 0;
    Digest codeHash;   // zero for plain key-holders
    Digest storageRoot;

    Bytes serialize() const {
        ByteWriter w;
        w.u64(nonce);
        w.raw(codeHash);
        w.raw(storageRoot);
        return w.take();
    }
    static Account parse(ByteReader& r) {
        Account a;
        a.nonce = r.u64();
        a.codeHash = r.fixed<32>();
        a.storageRoot = r.fixed<32>();
        return a;
    }
};

struct Transaction {
    enum class Kind : uint8_t { Call = 0, Create = 1 };

    Bytes senderPubKey;
    uint64_t nonce = 0;
    Kind kind = Kind::Call;
    Address target;          // zero for Create
    std::string templateId;  // Create only
    std::string method;
    Bytes args;
    Bytes signature;

    Address sender() const { return addressOfPubKey(senderPubKey); }

    Bytes signedBytes() const {
        ByteWriter w;
        w.lp32(senderPubKey);
        w.u64(nonce);
        w.u8(static_cast<uint8_t>(kind));
        w.raw(target);
        w.lp16(templateId);
        w.lp16(method);
        w.lp32(args);
        return w.take();
    }
    Bytes serialize() const {
        ByteWriter w;
        w.raw(signedBytes());
        w.lp32(signature);
        return w.take();
    }
    static Transaction parse(ByteReader& r) {
        Transaction t;
        t.senderPubKey = r.lp32();
        t.nonce = r.u64();
        uint8_t k = r.u8();
        if (k > 1) throw DecodeError("bad tx kind");
        t.kind = static_cast<Kind>(k);
        t.target = r.fixed<20>();
        t.templateId = r.lpstr16();
        t.method = r.lpstr16();
        t.args = r.lp32();
        t.signature = r.lp32();
        return t;
    }
    Digest id() const { return sha256(serialize()); }
};

struct Event {
    Address contract;
    std::string name;
    // ordered key/value pairs; values already rendered to strings
    std::vector<std::pair<std::string, std::string>> fields;
};

struct Receipt {
    enum class Status : uint8_t { Ok, Reverted, RejectedNonce, RejectedSig };

    Digest txId;
    uint64_t blockNumber = 0;
    uint32_t indexInBlock = 0;
    Status status = Status::Ok;
    std::string revertReason;
    uint64_t opCount = 0;
    std::vector<Event> events;
    std::optional<Address> createdContract;

    static const char* statusName(Status s) {
        switch (s) {
            case Status::Ok: return "OK";
            case Status::Reverted: return "REVERTED";
            case Status::RejectedNonce: return "REJECTED_NONCE";
            case Status::RejectedSig: return "REJECTED_SIG";
        }
        return "?";
    }
};

struct Block {
    BlockHeader header;
    std::vector<Transaction> txs;
};

class Chain;

/// The view a contract handler gets of the chain while its transaction runs.
/// Storage access is limited to the contract's own account plus read-only
/// peeks at other contracts; block hash lookback is capped by the config's
/// hash window.
class ExecEnv {
public:
    Address sender;
    Address self;
    uint64_t now = 0;

    const std::string& method() const { return method_; }
    ByteReader args() const { return ByteReader(args_); }

    const ChainConfig& cfg() const;
    const SigScheme& scheme() const;
    uint64_t sealedCount() const;
    Digest lastBHash(uint64_t i) const;
    uint64_t lastBTime(uint64_t i) const;

    Bytes load(const std::string& label) const;
    bool has(const std::string& label) const { return !load(label).empty(); }
    void store(const std::string& label, const Bytes& v);
    std::optional<Bytes> loadOf(const Address& other, const std::string& label) const;
    bool contractExists(const Address& a) const;

    void emit(std::string name, std::vector<std::pair<std::string, std::string>> fields) {
        countOp();
        events_.push_back(Event{self, std::move(name), std::move(fields)});
    }
    [[noreturn]] void revert(const std::string& code) { throw RevertSignal{code}; }
    void countOp(uint64_t n = 1) const { opCount_ += n; }

private:
    friend class Chain;
    Chain* chain_ = nullptr;
    std::string method_;
    Bytes args_;
    std::vector<Event> events_;
    mutable uint64_t opCount_ = 0;
};

using ContractHandler = std::function<void(ExecEnv&)>;

struct ContractTemplate {
    std::string id;
    std::string version;
    ContractHandler handler;

    Digest codeHash() const { return Sha256().add(id).add(version).done(); }
};

/// One storage slot pre-seeded at genesis.
struct GenesisSlot {
    std::string label;
    Bytes value;
};
struct GenesisAlloc {
    Address addr;
    Digest codeHash;
    std::vector<GenesisSlot> slots;
};

/// Deterministic single-miner chain. Blocks are sealed on demand with an
/// explicit timestamp; there is no difficulty, no fork choice, and a sealed
/// block is final. All account state lives in Merkle tries so any slot can be
/// proven against a header's state root.
class Chain {
public:
    Chain(ChainConfig cfg, std::vector<GenesisAlloc> allocs)
        : cfg_(std::move(cfg)), scheme_(&schemeByName(cfg_.schemeName)) {
        cfg_.validate();
        for (GenesisAlloc& a : allocs) {
            AccountState& st = accounts_[a.addr];
            st.codeHash = a.codeHash;
            for (GenesisSlot& s : a.slots) st.storage.put(slotKey(s.label), s.value);
            writeAccount(a.addr);
        }
        BlockHeader genesis;
        genesis.parentHash = Digest{};
        genesis.number = 0;
        genesis.timestamp = 0;
        genesis.stateRoot = stateTrie_.root();
        genesis.txRoot = Trie::emptyRoot();
        seal(Block{genesis, {}}, {});
    }

    void registerTemplate(ContractTemplate t) {
        Digest h = t.codeHash();
        templatesById_[t.id] = t;
        templatesByHash_[h] = std::move(t);
    }
    const ContractTemplate* templateByHash(const Digest& h) const {
        auto it = templatesByHash_.find(h);
        return it == templatesByHash_.end() ? nullptr : &it->second;
    }

    const ChainConfig& config() const { return cfg_; }
    const SigScheme& scheme() const { return *scheme_; }

    /// Signature-checked admission; nonce problems surface at mine time in
    /// the receipt instead.
    Digest submitTx(Transaction tx) {
        if (!scheme_->verify(tx.senderPubKey, tx.signedBytes(), tx.signature))
            throw BadSignature();
        Digest id = tx.id();
        queue_.push_back(std::move(tx));
        return id;
    }

    /// Admission with no checks at all. Log replay and adversarial harnesses
    /// use this; mine-time verification still decides the receipt.
    Digest enqueueUnchecked(Transaction tx) {
        Digest id = tx.id();
        queue_.push_back(std::move(tx));
        return id;
    }

    BlockHeader mineBlock(uint64_t timestamp) {
        if (timestamp <= head().timestamp) throw NonMonotonicTimestamp();
        std::vector<Transaction> submitted;
        submitted.swap(queue_);
        touched_.clear();

        Block block;
        std::vector<Receipt> receipts;
        // Signatures are re-checked at mine time so a replayed log and a live
        // run agree on every receipt.
        std::vector<Transaction> pending;
        for (Transaction& tx : submitted) {
            if (!scheme_->verify(tx.senderPubKey, tx.signedBytes(), tx.signature))
                pushReceipt(block, receipts, tx, Receipt::Status::RejectedSig, {});
            else
                pending.push_back(std::move(tx));
        }
        // Nonce-ordered execution regardless of submission order: txs whose
        // nonce is still ahead wait for a later pass; when a full pass makes
        // no progress the stragglers are rejected.
        while (!pending.empty()) {
            std::vector<Transaction> deferred;
            for (Transaction& tx : pending) {
                uint64_t have = nonceOf(tx.sender());
                if (tx.nonce > have) {
                    deferred.push_back(std::move(tx));
                    continue;
                }
                if (tx.nonce < have) {
                    pushReceipt(block, receipts, tx, Receipt::Status::RejectedNonce, {});
                    continue;
                }
                execute(block, receipts, tx, timestamp);
            }
            if (deferred.size() == pending.size()) {
                for (Transaction& tx : deferred)
                    pushReceipt(block, receipts, tx, Receipt::Status::RejectedNonce, {});
                break;
            }
            pending = std::move(deferred);
        }

        for (const Address& a : touched_) writeAccount(a);

        Trie txTrie;
        for (size_t i = 0; i < block.txs.size(); i++) {
            ByteWriter w;
            w.u64(i);
            txTrie.put(sha256(w.take()), block.txs[i].serialize());
        }
        block.header.parentHash = headHash();
        block.header.number = head().number + 1;
        block.header.timestamp = timestamp;
        block.header.stateRoot = stateTrie_.root();
        block.header.txRoot = txTrie.root();
        seal(std::move(block), std::move(receipts));
        return head();
    }

    // -- header access ------------------------------------------------------

    const BlockHeader& head() const { return blocks_.back().header; }
    Digest headHash() const { return hashes_.back(); }
    uint64_t sealedCount() const { return blocks_.size(); }
    const BlockHeader& headerAt(uint64_t n) const {
        if (n >= blocks_.size()) throw ChainError("no such block: " + std::to_string(n));
        return blocks_[n].header;
    }
    Digest headerHashAt(uint64_t n) const {
        if (n >= hashes_.size()) throw ChainError("no such block: " + std::to_string(n));
        return hashes_[n];
    }
    std::vector<BlockHeader> headRange(uint64_t fromTime) const {
        std::vector<BlockHeader> out;
        for (const Block& b : blocks_)
            if (b.header.timestamp >= fromTime) out.push_back(b.header);
        return out;
    }
    std::vector<BlockHeader> headersAfter(uint64_t number, size_t max) const {
        std::vector<BlockHeader> out;
        for (uint64_t n = number + 1; n < blocks_.size() && out.size() < max; n++)
            out.push_back(blocks_[n].header);
        return out;
    }

    const std::vector<Receipt>& receiptsAt(uint64_t n) const {
        if (n >= receipts_.size()) throw ChainError("no such block: " + std::to_string(n));
        return receipts_[n];
    }
    std::optional<Receipt> receiptOf(const Digest& txId) const {
        for (auto it = receipts_.rbegin(); it != receipts_.rend(); ++it)
            for (const Receipt& r : *it)
                if (r.txId == txId) return r;
        return std::nullopt;
    }
    const Block& blockAt(uint64_t n) const {
        if (n >= blocks_.size()) throw ChainError("no such block: " + std::to_string(n));
        return blocks_[n];
    }

    // -- state access -------------------------------------------------------

    struct AccountState {
        uint64_t nonce = 0;
        Digest codeHash;
        Trie storage;
        Account account() const { return Account{nonce, codeHash, storage.root()}; }
    };

    const AccountState* account(const Address& a) const {
        auto it = accounts_.find(a);
        return it == accounts_.end() ? nullptr : &it->second;
    }
    uint64_t nonceOf(const Address& a) const {
        const AccountState* st = account(a);
        return st ? st->nonce : 0;
    }
    std::optional<Bytes> storageValue(const Address& a, const std::string& label) const {
        const AccountState* st = account(a);
        if (!st) return std::nullopt;
        return st->storage.get(slotKey(label));
    }

    struct ProvenValue {
        Bytes value;
        InclusionProof proof;
    };

    /// Proof of the account record under the head state root.
    ProvenValue accountProof(const Address& a) const {
        const AccountState* st = account(a);
        if (!st) throw UnknownAccount(a.hex());
        InclusionProof p = stateTrie_.prove(sha256(a.toBytes()));
        return {p.value, std::move(p)};
    }

    /// Proof of one storage slot under the account's storage root.
    ProvenValue storageProof(const Address& a, const std::string& label) const {
        const AccountState* st = account(a);
        if (!st) throw UnknownAccount(a.hex());
        std::optional<Bytes> v = st->storage.get(slotKey(label));
        if (!v) throw UnknownSlot(label);
        InclusionProof p = st->storage.prove(slotKey(label));
        return {*v, std::move(p)};
    }

    std::optional<Transaction> creationTxOf(const Address& contract) const {
        auto it = creations_.find(contract);
        if (it == creations_.end()) return std::nullopt;
        return blocks_[it->second.first].txs[it->second.second];
    }

    static Address contractAddress(const Address& creator, uint64_t nonce) {
        ByteWriter w;
        w.raw(creator);
        w.u64(nonce);
        Digest d = sha256(w.take());
        Address a;
        std::memcpy(a.data(), d.data(), 20);
        return a;
    }

    // -- dump / load --------------------------------------------------------

    /// Append-only log: config preamble then every sealed block verbatim.
    void dump(std::ostream& os) const {
        Bytes pre = cfg_.serialize();
        os.write(reinterpret_cast<const char*>(pre.data()), static_cast<std::streamsize>(pre.size()));
        for (const Block& b : blocks_) {
            ByteWriter w;
            w.raw(b.header.serialize());
            w.u32(static_cast<uint32_t>(b.txs.size()));
            for (const Transaction& tx : b.txs) w.lp32(tx.serialize());
            Bytes rec = w.take();
            os.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
        }
    }

    struct LoadedLog {
        ChainConfig config;
        std::vector<Block> blocks;
    };

    static LoadedLog parseLog(std::istream& is) {
        Bytes all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        ByteReader r(all);
        LoadedLog log;
        try {
            log.config = ChainConfig::parse(r);
            while (!r.done()) {
                Block b;
                Bytes hdr = r.bytes(BlockHeader::kWireSize);
                ByteReader hr(hdr);
                b.header = BlockHeader::parse(hr);
                uint32_t n = r.u32();
                for (uint32_t i = 0; i < n; i++) {
                    Bytes txb = r.lp32();
                    ByteReader tr(txb);
                    b.txs.push_back(Transaction::parse(tr));
                    tr.expectDone();
                }
                log.blocks.push_back(std::move(b));
            }
        } catch (const DecodeError& e) {
            throw LoadError(e.what());
        }
        if (log.blocks.empty()) throw LoadError("log holds no blocks");
        return log;
    }

    /// Replays a log through a freshly made chain (the factory builds genesis
    /// from the preamble config) and insists every sealed header comes out
    /// identical to the recorded one.
    static Chain load(std::istream& is, const std::function<Chain(const ChainConfig&)>& factory) {
        LoadedLog log = parseLog(is);
        Chain chain = factory(log.config);
        if (chain.head().serialize() != log.blocks[0].header.serialize())
            throw LoadError("genesis mismatch");
        for (size_t i = 1; i < log.blocks.size(); i++) {
            const Block& b = log.blocks[i];
            for (const Transaction& tx : b.txs) chain.enqueueUnchecked(tx);
            BlockHeader sealed = chain.mineBlock(b.header.timestamp);
            if (sealed.serialize() != b.header.serialize())
                throw LoadError("replay diverged at block " + std::to_string(b.header.number));
        }
        return chain;
    }

private:
    friend class ExecEnv;

    void seal(Block b, std::vector<Receipt> receipts) {
        hashes_.push_back(b.header.hash());
        blocks_.push_back(std::move(b));
        receipts_.push_back(std::move(receipts));
    }

    void writeAccount(const Address& a) {
        stateTrie_.put(sha256(a.toBytes()), accounts_[a].account().serialize());
    }

    void pushReceipt(Block& block, std::vector<Receipt>& receipts, Transaction& tx,
                     Receipt::Status status, std::optional<Receipt> full) {
        Receipt r = full ? std::move(*full) : Receipt{};
        r.txId = tx.id();
        r.blockNumber = head().number + 1;
        r.indexInBlock = static_cast<uint32_t>(block.txs.size());
        r.status = status;
        receipts.push_back(std::move(r));
        block.txs.push_back(std::move(tx));
    }

    void execute(Block& block, std::vector<Receipt>& receipts, Transaction& tx, uint64_t timestamp) {
        Address sender = tx.sender();
        Address target;
        const ContractTemplate* tpl = nullptr;
        bool creating = tx.kind == Transaction::Kind::Create;

        std::string preflight;
        if (creating) {
            target = contractAddress(sender, tx.nonce);
            auto it = templatesById_.find(tx.templateId);
            tpl = it == templatesById_.end() ? nullptr : &it->second;
            if (!tpl)
                preflight = "UNKNOWN_TEMPLATE";
            else if (accounts_.count(target))
                preflight = "ADDRESS_TAKEN";
        } else {
            target = tx.target;
            const AccountState* st = account(target);
            if (st && !st->codeHash.isZero()) tpl = templateByHash(st->codeHash);
            if (!tpl) preflight = "NOT_A_CONTRACT";
        }
        if (!preflight.empty()) {
            Receipt out;
            out.revertReason = preflight;
            pushReceipt(block, receipts, tx, Receipt::Status::Reverted, std::move(out));
            return;
        }

        Receipt out;

        // Snapshot for rollback. Tries share structure, so this is cheap.
        AccountState senderBefore = accounts_[sender];
        std::optional<AccountState> targetBefore;
        if (auto it = accounts_.find(target); it != accounts_.end()) targetBefore = it->second;

        accounts_[sender].nonce++;
        if (creating) {
            AccountState fresh;
            fresh.codeHash = tpl->codeHash();
            accounts_[target] = std::move(fresh);
        }

        ExecEnv env;
        env.chain_ = this;
        env.sender = sender;
        env.self = target;
        env.now = timestamp;
        env.method_ = creating ? "init" : tx.method;
        env.args_ = tx.args;

        try {
            tpl->handler(env);
        } catch (const RevertSignal& rs) {
            rollback(sender, senderBefore, target, targetBefore);
            out.revertReason = rs.code;
            out.opCount = env.opCount_;
            pushReceipt(block, receipts, tx, Receipt::Status::Reverted, std::move(out));
            return;
        } catch (const DecodeError&) {
            rollback(sender, senderBefore, target, targetBefore);
            out.revertReason = "REVERT_BAD_ARGS";
            out.opCount = env.opCount_;
            pushReceipt(block, receipts, tx, Receipt::Status::Reverted, std::move(out));
            return;
        }

        touched_.insert(sender);
        touched_.insert(target);
        out.opCount = env.opCount_;
        out.events = std::move(env.events_);
        if (creating) {
            out.createdContract = target;
            creations_[target] = {blocks_.size(), block.txs.size()};
        }
        pushReceipt(block, receipts, tx, Receipt::Status::Ok, std::move(out));
    }

    /// A reverted transaction leaves no trace: contract storage, the created
    /// account, and the sender nonce all return to their pre-tx values, so
    /// the state root is bit-identical to before.
    void rollback(const Address& sender, const AccountState& senderBefore, const Address& target,
                  const std::optional<AccountState>& targetBefore) {
        accounts_[sender] = senderBefore;
        if (targetBefore)
            accounts_[target] = *targetBefore;
        else
            accounts_.erase(target);
    }

    ChainConfig cfg_;
    const SigScheme* scheme_;
    std::map<Address, AccountState> accounts_;
    Trie stateTrie_;
    std::vector<Block> blocks_;
    std::vector<Digest> hashes_;
    std::vector<std::vector<Receipt>> receipts_;
    std::vector<Transaction> queue_;
    std::set<Address> touched_;
    std::map<Address, std::pair<uint64_t, size_t>> creations_;  // contract -> (block, tx index)
    std::map<std::string, ContractTemplate> templatesById_;
    std::map<Digest, ContractTemplate> templatesByHash_;
};

inline const ChainConfig& ExecEnv::cfg() const { return chain_->config(); }
inline const SigScheme& ExecEnv::scheme() const { return chain_->scheme(); }
inline uint64_t ExecEnv::sealedCount() const { return chain_->sealedCount(); }

inline Digest ExecEnv::lastBHash(uint64_t i) const {
    countOp();
    if (i == 0 || i > chain_->config().hashWindow || i > chain_->sealedCount()) throw OutOfWindow(i);
    return chain_->headerHashAt(chain_->sealedCount() - i);
}
inline uint64_t ExecEnv::lastBTime(uint64_t i) const {
    countOp();
    if (i == 0 || i > chain_->config().hashWindow || i > chain_->sealedCount()) throw OutOfWindow(i);
    return chain_->headerAt(chain_->sealedCount() - i).timestamp;
}
inline Bytes ExecEnv::load(const std::string& label) const {
    countOp();
    auto v = chain_->accounts_[self].storage.get(slotKey(label));
    return v ? *v : Bytes{};
}
inline void ExecEnv::store(const std::string& label, const Bytes& v) {
    countOp();
    chain_->accounts_[self].storage.put(slotKey(label), v);
}
inline std::optional<Bytes> ExecEnv::loadOf(const Address& other, const std::string& label) const {
    countOp();
    return chain_->storageValue(other, label);
}
inline bool ExecEnv::contractExists(const Address& a) const {
    const Chain::AccountState* st = chain_->account(a);
    return st && !st->codeHash.isZero();
}

/// Pulls just the headers out of a serialized chain log.
inline std::vector<BlockHeader> headersFromLog(std::istream& is) {
    Chain::LoadedLog log = Chain::parseLog(is);
    std::vector<BlockHeader> out;
    out.reserve(log.blocks.size());
    for (const Block& b : log.blocks) out.push_back(b.header);
    return out;
}

}  // namespace smartcert
