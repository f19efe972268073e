#include "doctest.h"

#include "../oracles.hpp"
#include "pmon/modbus/frame.hpp"
#include "pmon/transport/bit_flip_proxy.hpp"
#include "pmon/transport/endpoint.hpp"
#include "pmon/transport/factory.hpp"
#include "pmon/transport/memory_bus.hpp"
#include "pmon/transport/rtu_framing.hpp"
#include "pmon/transport/tcp.hpp"

#include <bit>
#include <thread>

using namespace pmon;
using namespace pmon::transport;
using namespace std::chrono_literals;
using pmon::test::with_crc;

namespace {

Bytes read_exactly(Channel& ch, std::size_t n, milliseconds timeout = 500ms)
{
    Bytes out;
    const auto deadline = Clock::now() + timeout;
    while (out.size() < n && Clock::now() < deadline) {
        auto chunk = ch.read_some(10ms);
        out.insert(out.end(), chunk.begin(), chunk.end());
    }
    return out;
}

} // namespace

TEST_CASE("memory bus delivers to every other endpoint but not back to the sender")
{
    auto bus = MemoryBus::create("drop");
    auto a = bus->attach(), b = bus->attach(), c = bus->attach();
    const Bytes msg{1, 2, 3};
    a->write(msg);
    CHECK(read_exactly(*b, 3) == msg);
    CHECK(read_exactly(*c, 3) == msg);
    CHECK(a->read_some(20ms).empty());
}

TEST_CASE("closing a bus wakes readers with ChannelClosed")
{
    auto bus = MemoryBus::create();
    auto a = bus->attach();
    std::jthread closer([&] {
        std::this_thread::sleep_for(30ms);
        bus->close();
    });
    CHECK_THROWS_AS(a->read_some(2000ms), ChannelClosed);
}

TEST_CASE("pipe is duplex")
{
    auto [x, y] = make_pipe();
    x->write(Bytes{9});
    y->write(Bytes{8});
    CHECK(read_exactly(*y, 1) == Bytes{9});
    CHECK(read_exactly(*x, 1) == Bytes{8});
}

TEST_CASE("drain drops buffered bytes")
{
    auto [x, y] = make_pipe();
    x->write(Bytes{1, 2, 3, 4});
    std::this_thread::sleep_for(10ms);
    y->drain();
    CHECK(y->read_some(20ms).empty());
}

TEST_CASE("tcp loopback carries bytes both ways")
{
    TcpListener listener("127.0.0.1", 0);
    REQUIRE(listener.port() != 0);
    std::unique_ptr<Channel> server;
    std::jthread acceptor([&] { server = listener.accept(2000ms); });
    auto client = tcp_connect("127.0.0.1", listener.port(), 1000ms);
    acceptor.join();
    REQUIRE(server);
    const Bytes req{0x01, 0x04, 0x00, 0x00, 0x00, 0x02, 0x71, 0xCB};
    client->write(req);
    CHECK(read_exactly(*server, req.size()) == req);
    server->write(Bytes{0xAA});
    CHECK(read_exactly(*client, 1) == Bytes{0xAA});
    server->close();
    server.reset();
    CHECK_THROWS_AS(
        [&] {
            for (int i = 0; i < 50; ++i)
                client->read_some(20ms);
        }(),
        ChannelClosed);
}

TEST_CASE("tcp connect to a closed port fails")
{
    std::uint16_t port;
    {
        TcpListener probe("127.0.0.1", 0);
        port = probe.port();
    }
    CHECK_THROWS_AS(tcp_connect("127.0.0.1", port, 500ms), std::system_error);
}

TEST_CASE("a second listener on the same port fails to bind")
{
    TcpListener first("127.0.0.1", 0);
    CHECK_THROWS_AS(TcpListener("127.0.0.1", first.port()), std::system_error);
}

TEST_CASE("read_response_frame completes from the header length")
{
    auto [slave, master] = make_pipe();
    const std::vector<std::uint16_t> words{0x435C, 0x0000};
    const auto response = modbus::encode_read_response(1, words);
    // Dribble the frame in three pieces with short pauses.
    std::jthread writer([&, s = slave.get()] {
        s->write(std::span(response).first(2));
        std::this_thread::sleep_for(10ms);
        s->write(std::span(response).subspan(2, 3));
        std::this_thread::sleep_for(10ms);
        s->write(std::span(response).subspan(5));
    });
    const auto start = Clock::now();
    auto frame = read_response_frame(*master, Clock::now() + 500ms);
    REQUIRE(frame);
    CHECK(*frame == response);
    // Completed without waiting out a frame gap after the last byte.
    CHECK(Clock::now() - start < 45ms);
}

TEST_CASE("read_response_frame handles exceptions and silence")
{
    auto [slave, master] = make_pipe();
    const auto exc = modbus::encode_exception({1, 0x04, modbus::ExceptionCode::IllegalDataAddress});
    slave->write(exc);
    auto frame = read_response_frame(*master, Clock::now() + 300ms);
    REQUIRE(frame);
    CHECK(*frame == exc);

    const auto start = Clock::now();
    CHECK_FALSE(read_response_frame(*master, Clock::now() + 80ms));
    CHECK(Clock::now() - start >= 80ms);
}

TEST_CASE("read_response_frame ends an unknown frame on a gap")
{
    auto [slave, master] = make_pipe();
    slave->write(Bytes{0x01, 0x2B, 0x00});
    auto frame = read_response_frame(*master, Clock::now() + 500ms, 30ms);
    REQUIRE(frame);
    CHECK(frame->size() == 3);
}

TEST_CASE("RequestScanner finds frames behind noise")
{
    const auto req = modbus::encode_read_request({1, 0x0002, 2});
    RequestScanner scanner;
    scanner.feed(Bytes{0xFF, 0x13, 0x00, 0x42});
    scanner.feed(std::span(req).first(5));
    CHECK_FALSE(scanner.next());
    scanner.feed(std::span(req).subspan(5));
    auto got = scanner.next();
    REQUIRE(got);
    CHECK(*got == req);
    CHECK(scanner.buffered() == 0);
}

TEST_CASE("RequestScanner returns back-to-back frames in order")
{
    const auto a = modbus::encode_read_request({1, 0x0000, 2});
    const auto b = modbus::encode_read_request({2, 0x0004, 2});
    Bytes stream = a;
    stream.insert(stream.end(), b.begin(), b.end());
    RequestScanner scanner;
    scanner.feed(stream);
    CHECK(scanner.next() == a);
    CHECK(scanner.next() == b);
    CHECK_FALSE(scanner.next());
}

TEST_CASE("RequestScanner ignores response frames that happen to be eight bytes")
{
    // An exception-length frame padded to eight bytes with a valid CRC but a
    // function code with the high bit set.
    const auto fake = with_crc({0x01, 0x84, 0x02, 0x00, 0x00, 0x00});
    RequestScanner scanner;
    scanner.feed(fake);
    CHECK_FALSE(scanner.next());
}

TEST_CASE("RequestScanner keeps its buffer bounded")
{
    RequestScanner scanner;
    Bytes junk(4 * RequestScanner::kMaxBuffered, 0x55);
    scanner.feed(junk);
    CHECK_FALSE(scanner.next());
    CHECK(scanner.buffered() <= RequestScanner::kMaxBuffered);
}

TEST_CASE("endpoint parsing")
{
    auto tcp = parse_endpoint("tcp://127.0.0.1:5020");
    CHECK(tcp.kind == Endpoint::Kind::Tcp);
    CHECK(tcp.host == "127.0.0.1");
    CHECK(tcp.port == 5020);
    CHECK(tcp.to_string() == "tcp://127.0.0.1:5020");

    auto mem = parse_endpoint("mem://bus-a");
    CHECK(mem.kind == Endpoint::Kind::Memory);
    CHECK(mem.name == "bus-a");

    auto ser = parse_endpoint("serial:///dev/ttyUSB0");
    CHECK(ser.kind == Endpoint::Kind::Serial);
    CHECK(ser.name == "/dev/ttyUSB0");
    CHECK(parse_endpoint(ser.to_string()) == ser);

    for (const char* bad : {"", "tcp://", "tcp://host", "tcp://host:0", "tcp://host:70000", "udp://x:1", "mem://",
                            "serial://", "tcp://h:12ab"})
        CHECK_THROWS_AS(parse_endpoint(bad), std::invalid_argument);

    CHECK(parse_host_port("0.0.0.0:8080") == std::pair<std::string, std::uint16_t>{"0.0.0.0", 8080});
    CHECK_THROWS_AS(parse_host_port("8080"), std::invalid_argument);
    CHECK(parse_host_port("127.0.0.1:0").second == 0);
}

TEST_CASE("factory opens registered buses and rejects unknown ones")
{
    ChannelFactory factory;
    auto bus = MemoryBus::create("known");
    factory.add_bus(bus);
    auto peer = bus->attach();
    auto ch = factory.open(parse_endpoint("mem://known"), {}, 100ms);
    ch->write(Bytes{7});
    CHECK(read_exactly(*peer, 1) == Bytes{7});
    CHECK_THROWS(factory.open(parse_endpoint("mem://unknown"), {}, 100ms));
}

TEST_CASE("bit flip proxy corrupts at the requested rate and only by one bit")
{
    auto [slave, master] = make_pipe();
    auto stats = std::make_shared<BitFlipProxy::Stats>();
    BitFlipProxy proxy(std::move(master), 0.5, 11, stats);
    int flipped = 0;
    const int rounds = 400;
    for (int i = 0; i < rounds; ++i) {
        const Bytes sent{0x10, 0x20, 0x30, 0x40};
        slave->write(sent);
        const auto got = read_exactly(proxy, sent.size());
        REQUIRE(got.size() == sent.size());
        int bits = 0;
        for (std::size_t k = 0; k < sent.size(); ++k)
            bits += std::popcount(static_cast<unsigned>(sent[k] ^ got[k]));
        REQUIRE(bits <= 1);
        flipped += bits;
    }
    CHECK(stats->corrupted.load() == static_cast<std::uint64_t>(flipped));
    CHECK(flipped > rounds / 4);
    CHECK(flipped < 3 * rounds / 4);
}
