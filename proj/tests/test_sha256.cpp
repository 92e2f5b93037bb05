#include <openssl/sha.h>

#include <random>
#include <string>
#include <vector>

#include "chimera/errors.hpp"
#include "chimera/sha256.hpp"
#include "doctest.h"

using namespace chimera;

namespace {

Hash256 openssl_sha256(const std::vector<std::uint8_t>& msg) {
  Hash256 h;
  SHA256(msg.data(), msg.size(), h.bytes.data());
  return h;
}

}  // namespace

TEST_SUITE("sha256") {
  TEST_CASE("FIPS 180-4 example messages") {
    CHECK(sha256_digest("abc").hex() ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_digest("").hex() ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_digest("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq").hex() ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    CHECK(sha256_digest(std::string(1000000, 'a')).hex() ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
  }

  TEST_CASE("matches OpenSSL on random messages around block boundaries") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> byte(0, 255);
    for (std::size_t len : {0, 1, 54, 55, 56, 57, 63, 64, 65, 119, 120, 127, 128, 129, 1000, 4097}) {
      for (int rep = 0; rep < 4; ++rep) {
        std::vector<std::uint8_t> msg(len);
        for (auto& b : msg) b = static_cast<std::uint8_t>(byte(rng));
        CAPTURE(len);
        CHECK(sha256_digest(msg) == openssl_sha256(msg));
      }
    }
  }

  TEST_CASE("incremental updates equal one-shot digest") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> byte(0, 255);
    std::vector<std::uint8_t> msg(777);
    for (auto& b : msg) b = static_cast<std::uint8_t>(byte(rng));
    for (std::size_t chunk : {1, 3, 63, 64, 65, 200}) {
      Sha256 ctx;
      for (std::size_t i = 0; i < msg.size(); i += chunk) {
        ctx.update(std::span(msg).subspan(i, std::min(chunk, msg.size() - i)));
      }
      CHECK(ctx.finish() == openssl_sha256(msg));
    }
  }

  TEST_CASE("finish resets the context") {
    Sha256 ctx;
    ctx.update("abc");
    const auto first = ctx.finish();
    ctx.update("abc");
    CHECK(ctx.finish() == first);
  }

  TEST_CASE("hex round trip and validation") {
    const auto h = sha256_digest("round trip");
    CHECK(Hash256::from_hex(h.hex()) == h);
    CHECK(Hash256::from_hex("BA7816BF8F01CFEA414140DE5DAE2223B00361A396177A9CB410FF61F20015AD") ==
          sha256_digest("abc"));
    CHECK_THROWS_AS(Hash256::from_hex("abc"), InvalidArgument);
    CHECK_THROWS_AS(Hash256::from_hex(std::string(64, 'g')), InvalidArgument);
  }

  TEST_CASE("complement flips every bit") {
    const auto h = sha256_digest("x");
    const auto c = ~h;
    for (std::size_t i = 0; i < 32; ++i) CHECK((h.bytes[i] ^ c.bytes[i]) == 0xff);
  }
}
