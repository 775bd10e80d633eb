#pragma once

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/param_build.h>
#include <openssl/x509.h>

#include <memory>
#include <random>

#include "bytes.hpp"
#include "hash.hpp"

namespace smartcert {

struct KeyPair {
    Bytes pub;   // public key, scheme encoding (RSA: SubjectPublicKeyInfo DER)
    Bytes priv;  // private key, scheme encoding (RSA: PKCS#8 DER)
    Address address() const { return addressOfPubKey(pub); }
};

/// Signature primitive used everywhere: transaction authentication, CA policy
/// co-signing, and the server's key-exchange signature. Implementations must
/// be deterministic (same key, same message, same signature) so replaying a
/// transaction log reproduces it bit for bit.
class SigScheme {
public:
    virtual ~SigScheme() = default;
    virtual const std::string& name() const = 0;
    /// Key generation draws all entropy from the caller's generator, so a
    /// seeded run reproduces identical key material.
    virtual KeyPair generate(std::mt19937_64& rng) const = 0;
    virtual Bytes sign(const Bytes& priv, const Bytes& msg) const = 0;
    /// False on any failure, including garbage keys or signatures.
    virtual bool verify(const Bytes& pub, const Bytes& msg, const Bytes& sig) const = 0;
};

namespace sig_detail {

struct BnDel {
    void operator()(BIGNUM* p) const { BN_free(p); }
};
struct BnCtxDel {
    void operator()(BN_CTX* p) const { BN_CTX_free(p); }
};
struct PkeyDel {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct PkeyCtxDel {
    void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
using BnPtr = std::unique_ptr<BIGNUM, BnDel>;
using BnCtxPtr = std::unique_ptr<BN_CTX, BnCtxDel>;
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDel>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDel>;

/// Draws odd candidates with the top two bits pinned from the caller's
/// generator and keeps the first that passes the primality test, skipping
/// candidates where the public exponent divides p-1.
inline BnPtr drawPrime(std::mt19937_64& rng, int bits, BN_CTX* ctx) {
    std::vector<unsigned char> buf(static_cast<size_t>(bits) / 8);
    BnPtr cand(BN_new());
    for (;;) {
        for (auto& b : buf) b = static_cast<unsigned char>(rng());
        buf[0] |= 0xC0;
        buf.back() |= 1;
        BN_bin2bn(buf.data(), static_cast<int>(buf.size()), cand.get());
        BN_sub_word(cand.get(), 1);
        BN_ULONG rem = BN_mod_word(cand.get(), 65537);
        BN_add_word(cand.get(), 1);
        if (rem == 0) continue;
        if (BN_check_prime(cand.get(), ctx, nullptr) == 1) return cand;
    }
}

inline PkeyPtr parsePub(const Bytes& der) {
    const unsigned char* p = der.data();
    return PkeyPtr(d2i_PUBKEY(nullptr, &p, static_cast<long>(der.size())));
}

inline PkeyPtr parsePriv(const Bytes& der) {
    const unsigned char* p = der.data();
    PKCS8_PRIV_KEY_INFO* p8 =
        d2i_PKCS8_PRIV_KEY_INFO(nullptr, &p, static_cast<long>(der.size()));
    if (!p8) return nullptr;
    PkeyPtr key(EVP_PKCS82PKEY(p8));
    PKCS8_PRIV_KEY_INFO_free(p8);
    return key;
}

inline Bytes encodePub(EVP_PKEY* key) {
    unsigned char* der = nullptr;
    int len = i2d_PUBKEY(key, &der);
    if (len <= 0) throw std::runtime_error("public key encoding failed");
    Bytes out(der, der + len);
    OPENSSL_free(der);
    return out;
}

inline Bytes encodePriv(EVP_PKEY* key) {
    PKCS8_PRIV_KEY_INFO* p8 = EVP_PKEY2PKCS8(key);
    if (!p8) throw std::runtime_error("pkcs8 conversion failed");
    unsigned char* der = nullptr;
    int len = i2d_PKCS8_PRIV_KEY_INFO(p8, &der);
    PKCS8_PRIV_KEY_INFO_free(p8);
    if (len <= 0) throw std::runtime_error("pkcs8 encoding failed");
    Bytes out(der, der + len);
    OPENSSL_free(der);
    return out;
}

}  // namespace sig_detail

/// RSA-2048 with PKCS#1 v1.5 padding over SHA-256.
class Rsa2048Scheme : public SigScheme {
public:
    const std::string& name() const override {
        static const std::string n = "rsa2048";
        return n;
    }

    KeyPair generate(std::mt19937_64& rng) const override {
        using namespace sig_detail;
        BnCtxPtr ctx(BN_CTX_new());
        BnPtr p = drawPrime(rng, 1024, ctx.get());
        BnPtr q = drawPrime(rng, 1024, ctx.get());
        while (BN_cmp(p.get(), q.get()) == 0) q = drawPrime(rng, 1024, ctx.get());

        BnPtr n(BN_new()), e(BN_new()), d(BN_new()), p1(BN_new()), q1(BN_new()),
            phi(BN_new()), dp(BN_new()), dq(BN_new()), qinv(BN_new());
        BN_set_word(e.get(), 65537);
        BN_mul(n.get(), p.get(), q.get(), ctx.get());
        BN_sub(p1.get(), p.get(), BN_value_one());
        BN_sub(q1.get(), q.get(), BN_value_one());
        BN_mul(phi.get(), p1.get(), q1.get(), ctx.get());
        if (!BN_mod_inverse(d.get(), e.get(), phi.get(), ctx.get()))
            throw std::runtime_error("rsa keygen: no modular inverse");
        BN_mod(dp.get(), d.get(), p1.get(), ctx.get());
        BN_mod(dq.get(), d.get(), q1.get(), ctx.get());
        BN_mod_inverse(qinv.get(), q.get(), p.get(), ctx.get());

        OSSL_PARAM_BLD* bld = OSSL_PARAM_BLD_new();
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_N, n.get());
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_E, e.get());
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_D, d.get());
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_FACTOR1, p.get());
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_FACTOR2, q.get());
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_EXPONENT1, dp.get());
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_EXPONENT2, dq.get());
        OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_COEFFICIENT1, qinv.get());
        OSSL_PARAM* params = OSSL_PARAM_BLD_to_param(bld);

        sig_detail::PkeyCtxPtr kctx(EVP_PKEY_CTX_new_from_name(nullptr, "RSA", nullptr));
        EVP_PKEY* raw = nullptr;
        EVP_PKEY_fromdata_init(kctx.get());
        int ok = EVP_PKEY_fromdata(kctx.get(), &raw, EVP_PKEY_KEYPAIR, params);
        OSSL_PARAM_free(params);
        OSSL_PARAM_BLD_free(bld);
        if (ok != 1 || !raw) throw std::runtime_error("rsa keygen: assembly failed");
        sig_detail::PkeyPtr key(raw);

        KeyPair kp;
        kp.pub = sig_detail::encodePub(key.get());
        kp.priv = sig_detail::encodePriv(key.get());
        return kp;
    }

    Bytes sign(const Bytes& priv, const Bytes& msg) const override {
        using namespace sig_detail;
        PkeyPtr key = parsePriv(priv);
        if (!key) throw std::runtime_error("rsa sign: bad private key");
        PkeyCtxPtr ctx(EVP_PKEY_CTX_new(key.get(), nullptr));
        if (EVP_PKEY_sign_init(ctx.get()) != 1 ||
            EVP_PKEY_CTX_set_rsa_padding(ctx.get(), RSA_PKCS1_PADDING) != 1 ||
            EVP_PKEY_CTX_set_signature_md(ctx.get(), EVP_sha256()) != 1)
            throw std::runtime_error("rsa sign: init failed");
        Digest digest = sha256(msg);
        size_t len = 0;
        EVP_PKEY_sign(ctx.get(), nullptr, &len, digest.data(), digest.size());
        Bytes sig(len);
        if (EVP_PKEY_sign(ctx.get(), sig.data(), &len, digest.data(), digest.size()) != 1)
            throw std::runtime_error("rsa sign failed");
        sig.resize(len);
        return sig;
    }

    bool verify(const Bytes& pub, const Bytes& msg, const Bytes& sig) const override {
        using namespace sig_detail;
        PkeyPtr key = parsePub(pub);
        if (!key) return false;
        PkeyCtxPtr ctx(EVP_PKEY_CTX_new(key.get(), nullptr));
        if (!ctx) return false;
        if (EVP_PKEY_verify_init(ctx.get()) != 1 ||
            EVP_PKEY_CTX_set_rsa_padding(ctx.get(), RSA_PKCS1_PADDING) != 1 ||
            EVP_PKEY_CTX_set_signature_md(ctx.get(), EVP_sha256()) != 1)
            return false;
        Digest digest = sha256(msg);
        return EVP_PKEY_verify(ctx.get(), sig.data(), sig.size(), digest.data(),
                               digest.size()) == 1;
    }
};

/// Test-only scheme: instant keygen, hash-based tags. The public key embeds
/// the secret, so it authenticates nothing; it exists to keep algorithm-level
/// tests off the RSA cost and must never back a real deployment.
class TestSigScheme : public SigScheme {
public:
    const std::string& name() const override {
        static const std::string n = "testsig";
        return n;
    }

    KeyPair generate(std::mt19937_64& rng) const override {
        KeyPair kp;
        kp.priv.resize(32);
        for (auto& b : kp.priv) b = static_cast<uint8_t>(rng());
        kp.pub = {'t', 's'};
        kp.pub.insert(kp.pub.end(), kp.priv.begin(), kp.priv.end());
        return kp;
    }

    Bytes sign(const Bytes& priv, const Bytes& msg) const override {
        return Sha256().add(std::string("tsig")).add(priv).add(msg).done().toBytes();
    }

    bool verify(const Bytes& pub, const Bytes& msg, const Bytes& sig) const override {
        if (pub.size() != 34 || pub[0] != 't' || pub[1] != 's') return false;
        Bytes priv(pub.begin() + 2, pub.end());
        return sign(priv, msg) == sig;
    }
};

inline const SigScheme& schemeByName(const std::string& name) {
    static const Rsa2048Scheme rsa;
    static const TestSigScheme test;
    if (name == rsa.name()) return rsa;
    if (name == test.name()) return test;
    throw std::runtime_error("unknown signature scheme: " + name);
}

/// Derives an independent generator for a named purpose from a master seed,
/// so actors draw keys from disjoint deterministic streams.
inline std::mt19937_64 seededRng(uint64_t seed, const std::string& label) {
    ByteWriter w;
    w.u64(seed);
    w.str(label);
    Digest d = sha256(w.take());
    std::seed_seq seq(d.b.begin(), d.b.end());
    return std::mt19937_64(seq);
}

}  // namespace smartcert
