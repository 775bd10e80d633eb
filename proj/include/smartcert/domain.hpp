#pragma once

#include "handshake.hpp"

namespace smartcert {

class UnknownContract : public ChainError {
public:
    explicit UnknownContract(const Address& a) : ChainError("no contract at " + a.hex()) {}
};

/// The certificate a domain staples into handshakes: one account proof
/// establishing code hash and storage root, plus a proof per storage slot
/// the client decodes. Everything hangs off the anchor block's state root,
/// so a verifier needs nothing but its header window.
struct SmartCertCertificate {
    Address addr;
    uint64_t anchorNumber = 0;
    InclusionProof accountProof;
    std::vector<std::pair<std::string, InclusionProof>> slots;

    Bytes serialize() const {
        ByteWriter w;
        w.raw(addr);
        w.u64(anchorNumber);
        w.raw(accountProof.serialize());
        w.u16(static_cast<uint16_t>(slots.size()));
        for (const auto& [label, proof] : slots) {
            if (label.size() > 0xff) throw DecodeError("slot label too long");
            w.u8(static_cast<uint8_t>(label.size()));
            w.str(label);
            w.raw(proof.serialize());
        }
        return w.take();
    }

    static SmartCertCertificate parse(ByteReader& r) {
        SmartCertCertificate c;
        c.addr = r.fixed<20>();
        c.anchorNumber = r.u64();
        c.accountProof = InclusionProof::parse(r);
        uint16_t n = r.u16();
        for (uint16_t i = 0; i < n; i++) {
            std::string label = r.str(r.u8());
            c.slots.emplace_back(std::move(label), InclusionProof::parse(r));
        }
        return c;
    }

    static std::optional<SmartCertCertificate> fromBytes(const Bytes& b) {
        try {
            ByteReader r(b);
            SmartCertCertificate c = parse(r);
            r.expectDone();
            return c;
        } catch (const DecodeError&) {
            return std::nullopt;
        }
    }

    std::optional<Bytes> slotValue(const std::string& label) const {
        for (const auto& [l, proof] : slots)
            if (l == label) return proof.value;
        return std::nullopt;
    }
};

namespace domain_detail {

/// Chunked slots are proven chunk by chunk until the stored value runs out.
inline void proveChunks(const Chain& c, const Address& addr, const std::string& base,
                        std::vector<std::pair<std::string, InclusionProof>>& out) {
    for (size_t i = 0;; i++) {
        std::string label = base + ":" + std::to_string(i);
        std::optional<Bytes> v = c.storageValue(addr, label);
        if (!v || v->empty()) break;
        out.emplace_back(label, c.storageProof(addr, label).proof);
        if (v->size() < 32) break;
    }
}

}  // namespace domain_detail

/// Fresh proofs for every slot a client consumes, anchored at the head
/// block. The name hash slot rides along so a verifier can detect a
/// truncated chunk list.
inline SmartCertCertificate assembleCertificate(const Chain& c, const Address& addr) {
    const Chain::AccountState* st = c.account(addr);
    if (!st || st->codeHash.isZero()) throw UnknownContract(addr);
    SmartCertCertificate cert;
    cert.addr = addr;
    cert.anchorNumber = c.head().number;
    cert.accountProof = c.accountProof(addr).proof;

    auto word = [&](const std::string& label) {
        cert.slots.emplace_back(label, c.storageProof(addr, label).proof);
    };
    word("name");
    domain_detail::proveChunks(c, addr, "nameRaw", cert.slots);
    word("pkCount");
    uint64_t pkCount = wordValue(*c.storageValue(addr, "pkCount"));
    for (uint64_t j = 0; j < pkCount; j++)
        domain_detail::proveChunks(c, addr, "pk:" + std::to_string(j), cert.slots);
    word("created");
    word("updated");
    word("revoked");
    word("valid");
    return cert;
}

/// A CA that co-signs policy drafts for domains it serves.
struct CoSigner {
    Address addr;
    std::function<Bytes(const Bytes&)> sign;
};

/// Collects co-signatures over the draft and produces the signed newPolicy
/// transaction; contract reverts surface in the receipt as usual.
inline Transaction bootstrapPolicy(const Chain& chain, const KeyPair& sender,
                                   const std::string& name, const PolicyDoc& draft,
                                   const std::vector<CoSigner>& signers) {
    Bytes msg = policySignMessage(name, draft);
    std::vector<std::pair<Address, Bytes>> sigs;
    for (const CoSigner& s : signers) sigs.emplace_back(s.addr, s.sign(msg));

    Transaction tx;
    tx.senderPubKey = sender.pub;
    tx.nonce = chain.nonceOf(addressOfPubKey(sender.pub));
    tx.kind = Transaction::Kind::Call;
    tx.target = policyContractAddress();
    tx.method = "newPolicy";
    tx.args = buildNewPolicyArgs(name, draft, std::move(sigs));
    tx.signature = chain.scheme().sign(sender.priv, tx.signedBytes());
    return tx;
}

/// Domain-side agent: keeps the handshake server's staple stocked with a
/// fresh certificate. Time is driven externally, so the refresh cadence
/// composes with simulated clocks.
class DomainAgent {
public:
    DomainAgent(const Chain& chain, Address cert, HandshakeServer& server, uint64_t period)
        : chain_(chain), cert_(cert), server_(server), period_(period) {}

    /// Reassembles and swaps the staple unconditionally.
    void refresh() {
        SmartCertCertificate c = assembleCertificate(chain_, cert_);
        lastAnchor_ = c.anchorNumber;
        server_.setStaple(c.serialize());
        hasRefreshed_ = true;
    }

    /// Refreshes when the period elapsed (or nothing was ever stapled).
    /// Returns whether a refresh happened.
    bool tick(uint64_t now) {
        if (hasRefreshed_ && now < lastRefreshAt_ + period_) return false;
        refresh();
        lastRefreshAt_ = now;
        return true;
    }

    uint64_t period() const { return period_; }
    uint64_t lastAnchor() const { return lastAnchor_; }

private:
    const Chain& chain_;
    Address cert_;
    HandshakeServer& server_;
    uint64_t period_;
    uint64_t lastRefreshAt_ = 0;
    uint64_t lastAnchor_ = 0;
    bool hasRefreshed_ = false;
};

}  // namespace smartcert
