#include <string>

#include "doctest.h"
#include "noiselab/error.hpp"
#include "noiselab/rng.hpp"
#include "noiselab/text.hpp"

using namespace noiselab;
namespace nt = noiselab::text;

TEST_CASE("utf8 round trip") {
    const std::string s = "heißt bewölkt – ¿qué? 日本";
    CHECK(nt::encode_utf8(nt::decode_utf8(s)) == s);
}

TEST_CASE("utf8 rejects malformed input") {
    CHECK_THROWS_AS(nt::decode_utf8("\xC3"), Utf8Error);          // truncated
    CHECK_THROWS_AS(nt::decode_utf8("\x80后"), Utf8Error);        // stray continuation
    CHECK_THROWS_AS(nt::decode_utf8("\xC0\xAF"), Utf8Error);      // overlong
}

TEST_CASE("normalize lowercases and collapses whitespace") {
    CHECK(nt::normalize("I Am A Student") == "i am a student");
    CHECK(nt::normalize("  Heißt\tES ") == "heißt es");
}

TEST_CASE("normalize composes combining marks") {
    // a + combining diaeresis, o + combining diaeresis, u + combining diaeresis
    const std::string decomposed = "schön über Äpfel";
    CHECK(nt::normalize(decomposed) == "schön über äpfel");
}

TEST_CASE("normalize is idempotent on random strings") {
    Rng rng(7);
    const std::u32string pool = U" \t aAzZ?!.,0189äÖüß̈éÉ–  ";
    for (int trial = 0; trial < 200; ++trial) {
        std::u32string raw;
        const size_t len = rng.next_below(40);
        for (size_t i = 0; i < len; ++i) raw.push_back(pool[rng.next_below(pool.size())]);
        const std::string once = nt::normalize(nt::encode_utf8(raw));
        CHECK(nt::normalize(once) == once);
    }
}

TEST_CASE("segment_words find maximal letter runs") {
    auto spans_of = [](const std::string& s) {
        std::vector<std::string> words;
        const std::u32string cps = nt::decode_utf8(s);
        for (auto span : nt::segment_words(cps))
            words.push_back(nt::encode_utf8(cps.substr(span.begin, span.end - span.begin)));
        return words;
    };

    CHECK(spans_of("I am a student") == std::vector<std::string>{"I", "am", "a", "student"});
    CHECK(spans_of("abc 123 d!e") == std::vector<std::string>{"abc", "d", "e"});
    // Hand-applied letter-class rule with the German alphabet: digits break
    // the run, so "42mal" contributes only "mal".
    CHECK(spans_of("heißt 42mal") == std::vector<std::string>{"heißt", "mal"});
    CHECK(spans_of("") == std::vector<std::string>{});
    CHECK(spans_of("123 !?").empty());
}

TEST_CASE("segment_words offsets are codepoint-based") {
    const std::u32string cps = nt::decode_utf8("heißt 42mal");
    const auto spans = nt::segment_words(cps);
    REQUIRE(spans.size() == 2);
    CHECK(spans[0] == nt::Span{0, 5});
    CHECK(spans[1] == nt::Span{8, 11});
}

TEST_CASE("split_fields keeps empty fields for alignment") {
    CHECK(nt::split_fields("a b") == std::vector<std::string>{"a", "b"});
    CHECK(nt::split_fields("a  b") == std::vector<std::string>{"a", "", "b"});
    CHECK(nt::split_fields("") == std::vector<std::string>{});
}
