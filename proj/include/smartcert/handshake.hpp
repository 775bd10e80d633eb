#pragma once

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>

#include "contracts.hpp"

namespace smartcert {

// Handshake head only: client hello through server-hello-done. Key
// derivation and the record layer are out of scope; the signed key exchange
// is the part certificates care about.

inline constexpr uint8_t kMsgClientHello = 0x01;
inline constexpr uint8_t kMsgServerHello = 0x02;
inline constexpr uint8_t kMsgStapledCert = 0x03;
inline constexpr uint8_t kMsgServerKeyExchange = 0x04;
inline constexpr uint8_t kMsgServerHelloDone = 0x05;

/// One frame may carry a whole stapled certificate, so the cap is generous.
inline constexpr size_t kMaxFrame = 1 << 20;

inline constexpr uint16_t kDhGroupX25519 = 0x001d;

class HandshakeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class ConnectFailed : public HandshakeError {
public:
    using HandshakeError::HandshakeError;
};
class MalformedResponse : public HandshakeError {
public:
    using HandshakeError::HandshakeError;
};

/// A bidirectional ordered message pipe. Frames are (type, payload); the
/// wire form is a 4-byte big-endian length covering the type byte and the
/// payload.
class MsgStream {
public:
    virtual ~MsgStream() = default;
    virtual void sendMsg(uint8_t type, const Bytes& payload) = 0;
    virtual std::pair<uint8_t, Bytes> recvMsg() = 0;
};

// -- in-process transport ----------------------------------------------------

namespace pipe_detail {
struct Core {
    std::mutex m;
    std::condition_variable cv;
    std::deque<std::pair<uint8_t, Bytes>> toA, toB;
    bool closed = false;
};
}  // namespace pipe_detail

/// One end of an in-memory pipe; the opposite end sees what this end sends.
class PipeStream : public MsgStream {
public:
    PipeStream(std::shared_ptr<pipe_detail::Core> core, bool isA) : core_(std::move(core)), isA_(isA) {}
    ~PipeStream() override {
        std::lock_guard<std::mutex> lk(core_->m);
        core_->closed = true;
        core_->cv.notify_all();
    }

    void sendMsg(uint8_t type, const Bytes& payload) override {
        if (payload.size() + 1 > kMaxFrame) throw MalformedResponse("frame too large");
        std::lock_guard<std::mutex> lk(core_->m);
        if (core_->closed) throw MalformedResponse("pipe closed");
        (isA_ ? core_->toB : core_->toA).emplace_back(type, payload);
        core_->cv.notify_all();
    }

    std::pair<uint8_t, Bytes> recvMsg() override {
        std::unique_lock<std::mutex> lk(core_->m);
        auto& q = isA_ ? core_->toA : core_->toB;
        core_->cv.wait(lk, [&] { return !q.empty() || core_->closed; });
        if (q.empty()) throw MalformedResponse("pipe closed");
        auto msg = std::move(q.front());
        q.pop_front();
        return msg;
    }

    static std::pair<std::unique_ptr<PipeStream>, std::unique_ptr<PipeStream>> makePair() {
        auto core = std::make_shared<pipe_detail::Core>();
        return {std::make_unique<PipeStream>(core, true), std::make_unique<PipeStream>(core, false)};
    }

private:
    std::shared_ptr<pipe_detail::Core> core_;
    bool isA_;
};

// -- TCP transport -----------------------------------------------------------

class TcpStream : public MsgStream {
public:
    explicit TcpStream(int fd) : fd_(fd) {}
    ~TcpStream() override {
        if (fd_ >= 0) ::close(fd_);
    }
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    void sendMsg(uint8_t type, const Bytes& payload) override {
        if (payload.size() + 1 > kMaxFrame) throw MalformedResponse("frame too large");
        uint32_t len = static_cast<uint32_t>(payload.size() + 1);
        Bytes frame;
        frame.reserve(4 + len);
        for (int i = 3; i >= 0; i--) frame.push_back(static_cast<uint8_t>(len >> (8 * i)));
        frame.push_back(type);
        frame.insert(frame.end(), payload.begin(), payload.end());
        sendAll(frame.data(), frame.size());
    }

    std::pair<uint8_t, Bytes> recvMsg() override {
        uint8_t hdr[4];
        recvAll(hdr, 4);
        uint32_t len = uint32_t(hdr[0]) << 24 | uint32_t(hdr[1]) << 16 | uint32_t(hdr[2]) << 8 |
                       uint32_t(hdr[3]);
        if (len == 0 || len > kMaxFrame) throw MalformedResponse("bad frame length");
        Bytes body(len);
        recvAll(body.data(), body.size());
        uint8_t type = body[0];
        body.erase(body.begin());
        return {type, std::move(body)};
    }

private:
    void sendAll(const uint8_t* p, size_t n) {
        while (n > 0) {
            ssize_t w = ::send(fd_, p, n, MSG_NOSIGNAL);
            if (w <= 0) throw MalformedResponse("connection closed while sending");
            p += w;
            n -= static_cast<size_t>(w);
        }
    }
    void recvAll(uint8_t* p, size_t n) {
        while (n > 0) {
            ssize_t r = ::recv(fd_, p, n, 0);
            if (r <= 0) throw MalformedResponse("connection closed while reading");
            p += r;
            n -= static_cast<size_t>(r);
        }
    }

    int fd_;
};

inline std::unique_ptr<MsgStream> connectTcp(uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ConnectFailed("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        throw ConnectFailed("connect to 127.0.0.1:" + std::to_string(port) + " failed");
    }
    return std::make_unique<TcpStream>(fd);
}

// -- handshake logic ---------------------------------------------------------

struct ServerKeyExchange {
    Bytes params;
    Bytes sig;
};

struct HandshakeResponse {
    Bytes srvRnd;
    Bytes staple;
    ServerKeyExchange ske;
};

/// Server random: 4-byte big-endian timestamp then 28 random bytes.
inline Bytes makeSrvRnd(uint64_t now, std::mt19937_64& rng) {
    Bytes out;
    out.reserve(32);
    uint32_t t = static_cast<uint32_t>(now);
    for (int i = 3; i >= 0; i--) out.push_back(static_cast<uint8_t>(t >> (8 * i)));
    for (int i = 0; i < 28; i++) out.push_back(static_cast<uint8_t>(rng()));
    return out;
}

/// Key-exchange parameters: group id then a length-prefixed ephemeral value.
/// The value is random filler since no keys are derived from it.
inline Bytes makeDhParams(std::mt19937_64& rng) {
    Bytes value(32);
    for (auto& b : value) b = static_cast<uint8_t>(rng());
    ByteWriter w;
    w.u16(kDhGroupX25519);
    w.lp16(value);
    return w.take();
}

inline HandshakeResponse serverRespond(const Digest& cliRnd, const SigScheme& scheme,
                                       const Bytes& tlsPriv, const Bytes& staple, uint64_t now,
                                       std::mt19937_64& rng) {
    HandshakeResponse r;
    r.srvRnd = makeSrvRnd(now, rng);
    r.staple = staple;
    r.ske.params = makeDhParams(rng);
    r.ske.sig = scheme.sign(tlsPriv, validationMessage(cliRnd, r.srvRnd, r.ske.params));
    return r;
}

/// Serves exactly one hello exchange on the stream.
inline void serveOne(MsgStream& s, const SigScheme& scheme, const Bytes& tlsPriv,
                     const Bytes& staple, uint64_t now, std::mt19937_64& rng) {
    auto [type, ch] = s.recvMsg();
    if (type != kMsgClientHello || ch.size() != 32) throw MalformedResponse("bad client hello");
    Digest cliRnd;
    std::memcpy(cliRnd.data(), ch.data(), 32);
    HandshakeResponse resp = serverRespond(cliRnd, scheme, tlsPriv, staple, now, rng);
    s.sendMsg(kMsgServerHello, resp.srvRnd);
    s.sendMsg(kMsgStapledCert, resp.staple);
    ByteWriter w;
    w.lp16(resp.ske.params);
    w.lp32(resp.ske.sig);
    s.sendMsg(kMsgServerKeyExchange, w.take());
    s.sendMsg(kMsgServerHelloDone, {});
}

struct ExchangeResult {
    Bytes srvRnd;
    Bytes staple;
    Bytes params;
    Bytes sig;
};

/// Runs the client side of one hello exchange.
inline ExchangeResult runHello(MsgStream& s, const Digest& cliRnd) {
    s.sendMsg(kMsgClientHello, cliRnd.toBytes());
    ExchangeResult out;

    auto [t1, sh] = s.recvMsg();
    if (t1 != kMsgServerHello || sh.size() != 32) throw MalformedResponse("bad server hello");
    out.srvRnd = std::move(sh);

    auto [t2, staple] = s.recvMsg();
    if (t2 != kMsgStapledCert) throw MalformedResponse("expected stapled certificate");
    out.staple = std::move(staple);

    auto [t3, ske] = s.recvMsg();
    if (t3 != kMsgServerKeyExchange) throw MalformedResponse("expected server key exchange");
    try {
        ByteReader r(ske);
        out.params = r.lp16();
        out.sig = r.lp32();
        r.expectDone();
    } catch (const DecodeError&) {
        throw MalformedResponse("malformed server key exchange");
    }

    auto [t4, done] = s.recvMsg();
    if (t4 != kMsgServerHelloDone || !done.empty()) throw MalformedResponse("bad server hello done");
    return out;
}

// -- validation proofs -------------------------------------------------------

/// Everything a CA needs to submit a cert.update: the exchange transcript
/// fields the contract re-verifies. Serialized form doubles as the update
/// argument encoding.
struct ValidationProof {
    Digest cliRnd;
    Bytes srvRnd;
    Bytes params;
    Bytes sig;

    Bytes serialize() const { return buildCertUpdateArgs(cliRnd, srvRnd, params, sig); }

    static ValidationProof parse(ByteReader& r) {
        ValidationProof p;
        p.cliRnd = r.fixed<32>();
        p.srvRnd = r.bytes(32);
        p.params = r.lp16();
        p.sig = r.lp32();
        return p;
    }
};

inline ValidationProof caProbe(MsgStream& s, const Address& caAddr, const Digest& blockHash) {
    Digest cliRnd = makeCliRnd(caAddr, blockHash);
    ExchangeResult r = runHello(s, cliRnd);
    return ValidationProof{cliRnd, std::move(r.srvRnd), std::move(r.params), std::move(r.sig)};
}

inline ValidationProof caProbe(uint16_t port, const Address& caAddr, const Digest& blockHash) {
    std::unique_ptr<MsgStream> s = connectTcp(port);
    return caProbe(*s, caAddr, blockHash);
}

// -- server endpoint ---------------------------------------------------------

/// Loopback TCP endpoint serving one exchange per connection. Connections
/// run on their own threads and share only the identity material and the
/// current staple, which swaps atomically under the lock.
class HandshakeServer {
public:
    HandshakeServer(const SigScheme& scheme, Bytes tlsPriv, std::function<uint64_t()> clock,
                    uint64_t seed)
        : scheme_(scheme), tlsPriv_(std::move(tlsPriv)), clock_(std::move(clock)), rng_(seed) {}

    ~HandshakeServer() { stop(); }
    HandshakeServer(const HandshakeServer&) = delete;
    HandshakeServer& operator=(const HandshakeServer&) = delete;

    void setStaple(Bytes staple) {
        std::lock_guard<std::mutex> lk(m_);
        staple_ = std::move(staple);
    }
    Bytes staple() const {
        std::lock_guard<std::mutex> lk(m_);
        return staple_;
    }

    /// Answers one exchange in the calling thread; usable without TCP.
    void serve(MsgStream& s) {
        Bytes staple;
        std::mt19937_64 rng;
        {
            std::lock_guard<std::mutex> lk(m_);
            staple = staple_;
            rng.seed(rng_());
        }
        serveOne(s, scheme_, tlsPriv_, staple, clock_(), rng);
    }

    /// Binds 127.0.0.1 and starts accepting; port 0 picks an ephemeral one.
    uint16_t start(uint16_t port = 0) {
        listenFd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listenFd_ < 0) throw ConnectFailed("socket() failed");
        int one = 1;
        ::setsockopt(listenFd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = htons(port);
        if (::bind(listenFd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
            ::listen(listenFd_, 16) != 0) {
            ::close(listenFd_);
            listenFd_ = -1;
            throw ConnectFailed("bind/listen failed");
        }
        socklen_t len = sizeof addr;
        ::getsockname(listenFd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        acceptor_ = std::thread([this] { acceptLoop(); });
        return port_;
    }

    uint16_t port() const { return port_; }

    void stop() {
        int fd = listenFd_.exchange(-1);
        if (fd >= 0) {
            ::shutdown(fd, SHUT_RDWR);
            ::close(fd);
        }
        if (acceptor_.joinable()) acceptor_.join();
        while (active_.load() > 0) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }

private:
    void acceptLoop() {
        for (;;) {
            int fd = ::accept(listenFd_.load(), nullptr, nullptr);
            if (fd < 0) return;  // listener closed
            // Connection threads detach and reap themselves, so a long run
            // of short exchanges leaves nothing behind; stop() drains the
            // counter before returning.
            active_.fetch_add(1);
            try {
                std::thread([this, fd] {
                    {
                        TcpStream s(fd);
                        try {
                            serve(s);
                        } catch (const HandshakeError&) {
                            // a broken peer only loses its own connection
                        }
                    }
                    active_.fetch_sub(1);
                }).detach();
            } catch (const std::system_error&) {
                ::close(fd);
                active_.fetch_sub(1);
            }
        }
    }

    const SigScheme& scheme_;
    Bytes tlsPriv_;
    std::function<uint64_t()> clock_;
    mutable std::mutex m_;
    std::mt19937_64 rng_;
    Bytes staple_;
    std::atomic<int> active_{0};
    std::atomic<int> listenFd_{-1};
    std::thread acceptor_;
    uint16_t port_ = 0;
};

}  // namespace smartcert
