#include "doctest.h"

#include "../oracles.hpp"
#include "pmon/modbus/crc16.hpp"
#include "pmon/modbus/float_codec.hpp"
#include "pmon/modbus/frame.hpp"

#include <bit>
#include <limits>
#include <random>

using namespace pmon::modbus;
using pmon::test::crc16_bitwise;
using pmon::test::with_crc;

namespace {
Bytes hex(std::initializer_list<int> v)
{
    Bytes out;
    for (int b : v)
        out.push_back(static_cast<std::uint8_t>(b));
    return out;
}
} // namespace

TEST_CASE("crc16 of the voltage read request ends in 71 CB")
{
    const auto crc = crc16(hex({0x01, 0x04, 0x00, 0x00, 0x00, 0x02}));
    CHECK(crc.lo() == 0x71);
    CHECK(crc.hi() == 0xCB);
}

TEST_CASE("crc16 of nothing is the preset register")
{
    CHECK(crc16({}).value == 0xFFFF);
}

TEST_CASE("table crc matches the bit-by-bit oracle on random payloads")
{
    std::mt19937 rng(1234);
    std::uniform_int_distribution<int> len(0, 300), byte(0, 255);
    for (int i = 0; i < 1000; ++i) {
        Bytes data(static_cast<std::size_t>(len(rng)));
        for (auto& b : data)
            b = static_cast<std::uint8_t>(byte(rng));
        REQUIRE(crc16(data).value == crc16_bitwise(data));
    }
}

TEST_CASE("appending the crc validates and any single bit flip breaks it")
{
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> len(2, 64), byte(0, 255);
    for (int i = 0; i < 300; ++i) {
        Bytes data(static_cast<std::size_t>(len(rng)));
        for (auto& b : data)
            b = static_cast<std::uint8_t>(byte(rng));
        auto frame = with_crc(data);
        REQUIRE(crc_ok(frame));
        std::uniform_int_distribution<std::size_t> bit(0, frame.size() * 8 - 1);
        const auto b = bit(rng);
        frame[b / 8] ^= static_cast<std::uint8_t>(1u << (b % 8));
        REQUIRE_FALSE(crc_ok(frame));
    }
}

TEST_CASE("encode_read_request")
{
    SUBCASE("golden voltage read")
    {
        CHECK(encode_read_request({1, 0x0000, 2}) == hex({0x01, 0x04, 0x00, 0x00, 0x00, 0x02, 0x71, 0xCB}));
    }
    SUBCASE("unit 2 at 0x000A, crc from oracle")
    {
        const auto expected = with_crc(hex({0x02, 0x04, 0x00, 0x0A, 0x00, 0x02}));
        CHECK(expected == hex({0x02, 0x04, 0x00, 0x0A, 0x00, 0x02, 0x51, 0xFA}));
        CHECK(encode_read_request({2, 0x000A, 2}) == expected);
    }
    SUBCASE("invariants are enforced")
    {
        CHECK_THROWS_AS(encode_read_request({0, 0, 2}), std::invalid_argument);
        CHECK_THROWS_AS(encode_read_request({248, 0, 2}), std::invalid_argument);
        CHECK_THROWS_AS(encode_read_request({1, 0, 0}), std::invalid_argument);
        CHECK_THROWS_AS(encode_read_request({1, 0, 126}), std::invalid_argument);
        CHECK_THROWS_AS(encode_read_request({1, 0xFFFF, 2}), std::invalid_argument);
        CHECK_NOTHROW(encode_read_request({1, 0xFFFF, 1}));
        CHECK_NOTHROW(encode_read_request({247, 0xFF83, 125}));
    }
}

TEST_CASE("decode_request")
{
    CHECK(decode_request(hex({0x01, 0x04, 0x00, 0x00, 0x00, 0x02, 0x71, 0xCB})) == ReadRequest{1, 0, 2});

    auto expect_errc = [](const Bytes& frame, FrameErrc errc) {
        try {
            decode_request(frame);
            FAIL("no error");
        } catch (const FrameError& e) {
            CHECK(e.errc() == errc);
        }
    };
    expect_errc(hex({0x01, 0x04, 0x00, 0x00, 0x00, 0x02, 0x71, 0xCC}), FrameErrc::CrcMismatch);
    expect_errc(hex({0x01, 0x03, 0x00, 0x00, 0x00, 0x02, 0xC4, 0x0B}), FrameErrc::UnsupportedFunction);
    expect_errc(hex({0x01, 0x04, 0x00, 0x00, 0x00, 0x02, 0x71}), FrameErrc::ShortFrame);
    expect_errc(with_crc(hex({0x01, 0x04, 0x00, 0x00, 0x00, 0x00})), FrameErrc::InvalidRequest);
}

TEST_CASE("request round trip over random valid requests")
{
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> unit(1, 247), count(1, 125), start(0, 0xFFFF);
    for (int i = 0; i < 2000; ++i) {
        ReadRequest r{static_cast<std::uint8_t>(unit(rng)), 0, static_cast<std::uint16_t>(count(rng))};
        r.start = static_cast<std::uint16_t>(std::min(start(rng), 0x10000 - r.count));
        REQUIRE(decode_request(encode_read_request(r)) == r);
    }
}

TEST_CASE("encode_read_response")
{
    const std::vector<std::uint16_t> v220{0x435C, 0x0000};
    CHECK(encode_read_response(1, v220) == with_crc(hex({0x01, 0x04, 0x04, 0x43, 0x5C, 0x00, 0x00})));
    CHECK(encode_read_response(1, v220) == hex({0x01, 0x04, 0x04, 0x43, 0x5C, 0x00, 0x00, 0x2E, 0x12}));

    const std::vector<std::uint16_t> zeros{0, 0};
    const auto z = encode_read_response(1, zeros);
    CHECK(z[2] == 0x04);
    CHECK(z[3] == 0);
    CHECK(z[6] == 0);

    CHECK_THROWS_AS(encode_read_response(1, std::vector<std::uint16_t>{}), std::invalid_argument);
    CHECK_THROWS_AS(encode_read_response(1, std::vector<std::uint16_t>(126)), std::invalid_argument);
}

TEST_CASE("response round trip over random register lists")
{
    std::mt19937 rng(77);
    std::uniform_int_distribution<int> unit(1, 247), count(1, 125), word(0, 0xFFFF);
    for (int i = 0; i < 500; ++i) {
        const auto u = static_cast<std::uint8_t>(unit(rng));
        std::vector<std::uint16_t> regs(static_cast<std::size_t>(count(rng)));
        for (auto& w : regs)
            w = static_cast<std::uint16_t>(word(rng));
        const auto frame = encode_read_response(u, regs);
        REQUIRE(decode_response(frame, {u, 0, static_cast<std::uint16_t>(regs.size())}) == regs);
    }
}

TEST_CASE("decode_response errors")
{
    const ReadRequest expected{1, 0, 2};
    auto errc_of = [&](const Bytes& frame) {
        try {
            decode_response(frame, expected);
        } catch (const FrameError& e) {
            return e.errc();
        }
        FAIL("no error");
        return FrameErrc::ShortFrame;
    };

    CHECK(decode_response(hex({0x01, 0x04, 0x04, 0x43, 0x5C, 0x00, 0x00, 0x2E, 0x12}), expected) ==
          std::vector<std::uint16_t>{0x435C, 0x0000});

    const auto exc = hex({0x01, 0x84, 0x02, 0xC2, 0xC1});
    CHECK(exc == with_crc(hex({0x01, 0x84, 0x02})));
    CHECK(errc_of(exc) == FrameErrc::ExceptionReceived);
    try {
        decode_response(exc, expected);
    } catch (const FrameError& e) {
        CHECK(e.exception_code() == 0x02);
    }

    CHECK(errc_of(with_crc(hex({0x02, 0x04, 0x04, 0x43, 0x5C, 0x00, 0x00}))) == FrameErrc::UnitMismatch);
    CHECK(errc_of(with_crc(hex({0x01, 0x04, 0x02, 0x43, 0x5C}))) == FrameErrc::LengthMismatch);
    CHECK(errc_of(hex({0x01, 0x04, 0x04, 0x43, 0x5C, 0x00, 0x00, 0x2E, 0x13})) == FrameErrc::CrcMismatch);
    CHECK(errc_of(hex({0x01, 0x04})) == FrameErrc::ShortFrame);
}

TEST_CASE("decode_response never yields data from a corrupted frame")
{
    const auto good = encode_read_response(1, std::vector<std::uint16_t>{0x435C, 0x0000});
    for (std::size_t bit = 0; bit < good.size() * 8; ++bit) {
        auto bad = good;
        bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        CHECK_THROWS_AS(decode_response(bad, {1, 0, 2}), FrameError);
    }
}

TEST_CASE("float codec anchors")
{
    CHECK(f32_from_registers(0x0000, 0x0000) == 0.0f);
    CHECK(f32_from_registers(0x435C, 0x0000) == 220.0f);
    CHECK(f32_from_registers(0x4248, 0x0000) == 50.0f);

    // Layout oracle agrees on the anchors before we rely on them.
    CHECK(pmon::test::f32_bits_by_layout(220.0) == 0x435C0000u);
    CHECK(pmon::test::f32_bits_by_layout(50.0) == 0x42480000u);

    CHECK(f32_to_registers(220.0f) == std::pair<std::uint16_t, std::uint16_t>{0x435C, 0x0000});
    CHECK(f32_to_registers(0.0f) == std::pair<std::uint16_t, std::uint16_t>{0x0000, 0x0000});
}

TEST_CASE("float codec matches the layout oracle for normal values")
{
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> mag(-30, 30);
    for (int i = 0; i < 2000; ++i) {
        const float v = static_cast<float>(std::pow(2.0, mag(rng)) * (i % 2 ? -1 : 1));
        const auto [hi, lo] = f32_to_registers(v);
        REQUIRE(((static_cast<std::uint32_t>(hi) << 16) | lo) == pmon::test::f32_bits_by_layout(v));
    }
}

TEST_CASE("float codec rejects non-finite values")
{
    CHECK_THROWS_AS(f32_from_registers(0x7FC0, 0x0000), DecodeError);
    CHECK_THROWS_AS(f32_from_registers(0x7F80, 0x0000), DecodeError);
    CHECK_THROWS_AS(f32_from_registers(0xFF80, 0x0000), DecodeError);
    try {
        f32_from_registers(0x7F80, 0x0001);
    } catch (const DecodeError& e) {
        CHECK(e.kind() == DecodeError::Kind::NaN);
    }
    CHECK_THROWS_AS(f32_to_registers(std::numeric_limits<float>::infinity()), std::invalid_argument);
    CHECK_THROWS_AS(f32_to_registers(std::numeric_limits<float>::quiet_NaN()), std::invalid_argument);
}

TEST_CASE("float codec round trips random finite bit patterns exactly")
{
    std::mt19937 rng(31);
    int checked = 0;
    while (checked < 10000) {
        const auto bits = static_cast<std::uint32_t>(rng());
        const float v = std::bit_cast<float>(bits);
        if (!std::isfinite(v))
            continue;
        const auto [hi, lo] = f32_to_registers(v);
        REQUIRE(std::bit_cast<std::uint32_t>(f32_from_registers(hi, lo)) == bits);
        ++checked;
    }
}

TEST_CASE("expected_response_size reads the header")
{
    CHECK(expected_response_size(hex({0x01})) == 0);
    CHECK(expected_response_size(hex({0x01, 0x04})) == 0);
    CHECK(expected_response_size(hex({0x01, 0x04, 0x04})) == 9);
    CHECK(expected_response_size(hex({0x01, 0x84})) == 5);
    CHECK(expected_response_size(hex({0x01, 0x11})) == static_cast<std::size_t>(-1));
}
