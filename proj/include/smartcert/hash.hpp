#pragma once

#include <openssl/evp.h>

#include <initializer_list>
#include <span>

#include "bytes.hpp"

namespace smartcert {

/// Incremental SHA-256. One reused thread-local EVP context; the trie hashes
/// millions of short inputs and per-call context setup is what dominates
/// otherwise.
class Sha256 {
public:
    Sha256() {
        ctx_ = acquire();
        if (EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("sha256 init failed");
    }
    ~Sha256() { release(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;
    Sha256& add(const uint8_t* p, size_t n) {
        EVP_DigestUpdate(ctx_, p, n);
        return *this;
    }
    Sha256& add(const Bytes& v) { return add(v.data(), v.size()); }
    Sha256& add(std::span<const uint8_t> v) { return add(v.data(), v.size()); }
    template <size_t N>
    Sha256& add(const FixedBytes<N>& v) { return add(v.data(), N); }
    Sha256& add(uint8_t b) { return add(&b, 1); }
    Sha256& add(const std::string& s) {
        return add(reinterpret_cast<const uint8_t*>(s.data()), s.size());
    }
    Digest done() {
        Digest d;
        unsigned len = 0;
        EVP_DigestFinal_ex(ctx_, d.data(), &len);
        return d;
    }

private:
    // Per-thread context pool: contexts nest (hashing while another digest is
    // open) and EVP context setup is too slow to pay per call.
    static std::vector<EVP_MD_CTX*>& pool() {
        thread_local std::vector<EVP_MD_CTX*> p;
        return p;
    }
    static EVP_MD_CTX* acquire() {
        auto& p = pool();
        if (p.empty()) return EVP_MD_CTX_new();
        EVP_MD_CTX* ctx = p.back();
        p.pop_back();
        return ctx;
    }
    static void release(EVP_MD_CTX* ctx) { pool().push_back(ctx); }

    EVP_MD_CTX* ctx_;
};

inline Digest sha256(const Bytes& v) { return Sha256().add(v).done(); }
inline Digest sha256(const std::string& s) { return Sha256().add(s).done(); }

/// Hash of an ASCII storage label; storage tries key every slot by this.
inline Digest slotKey(const std::string& label) { return sha256(label); }

inline Address addressOfPubKey(const Bytes& der) {
    Digest d = sha256(der);
    Address a;
    std::memcpy(a.data(), d.data(), 20);
    return a;
}

/// First four bytes of H(CA address); prefixes the client random a CA embeds
/// in its probe so the contract can tell which CA a proof was minted for.
using CaTag = FixedBytes<4>;

inline CaTag caTag(const Address& ca) {
    Digest d = Sha256().add(ca).done();
    CaTag t;
    std::memcpy(t.data(), d.data(), 4);
    return t;
}

namespace detail {

/// emptyAt(h) is the digest of a vacant subtree of height h: height 0 is a
/// vacant leaf slot, and each level up hashes two copies of the level below.
/// The ladder is shared by the trie, proof verification, and the tests.
struct EmptyLadder {
    std::array<Digest, 257> e;
    EmptyLadder() {
        e[0] = Sha256().add(uint8_t{0x02}).done();
        for (size_t i = 1; i <= 256; i++)
            e[i] = Sha256().add(uint8_t{0x01}).add(e[i - 1]).add(e[i - 1]).done();
    }
};

}  // namespace detail

inline const Digest& emptyAt(size_t height) {
    static const detail::EmptyLadder ladder;
    return ladder.e.at(height);
}

}  // namespace smartcert
