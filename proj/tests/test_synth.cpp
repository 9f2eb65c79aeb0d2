#include <algorithm>
#include <set>

#include "doctest.h"
#include "dualnlu/corpus.hpp"
#include "dualnlu/synth.hpp"

using namespace dualnlu;

TEST_CASE("same seed reproduces the corpus, different seeds differ") {
  auto a = synth::generate(300, 7);
  auto b = synth::generate(300, 7);
  CHECK(a == b);

  auto c = synth::generate(300, 8);
  CHECK(c.size() == 300);
  CHECK(a != c);
}

TEST_CASE("examples are distinct, well-formed and sized as requested") {
  auto data = synth::generate(2000, 42);
  REQUIRE(data.size() == 2000);

  std::set<std::pair<Tokens, std::string>> seen;
  for (const auto& ex : data) {
    REQUIRE(ex.tokens.size() == ex.tags.size());
    CHECK(!ex.tokens.empty());
    CHECK(corpus::is_valid_iob(ex.tags));
    CHECK(seen.insert({ex.tokens, ex.intent}).second);
    for (const auto& t : ex.tokens) {
      CHECK(!t.empty());
      CHECK(t == corpus::lowercase(t));
    }
  }
}

TEST_CASE("all three intents and all six slots appear") {
  auto data = synth::generate(2000, 123);
  std::set<std::string> intents, slots;
  for (const auto& ex : data) {
    intents.insert(ex.intent);
    for (const auto& sv : corpus::form_of(ex).pairs) slots.insert(sv.slot);
  }
  CHECK(intents ==
        std::set<std::string>{"find_flight", "book_hotel", "play_music"});
  CHECK(slots ==
        std::set<std::string>{"FromCity", "ToCity", "Date", "Airline", "HotelName", "Artist"});
}

TEST_CASE("slot values come from the grammar lexicons and respect intent") {
  auto data = synth::generate(1500, 5);
  for (const auto& ex : data) {
    for (const auto& sv : corpus::form_of(ex).pairs) {
      if (ex.intent == "find_flight")
        CHECK((sv.slot == "FromCity" || sv.slot == "ToCity" || sv.slot == "Date" ||
               sv.slot == "Airline"));
      else if (ex.intent == "book_hotel")
        CHECK((sv.slot == "HotelName" || sv.slot == "ToCity" || sv.slot == "Date"));
      else
        CHECK(sv.slot == "Artist");
    }
  }
}

TEST_CASE("an impossible request is rejected") {
  CHECK_THROWS_AS(synth::generate(2000000, 1), ConfigError);
  CHECK_THROWS_AS(synth::generate(0, 1), ConfigError);
  CHECK_THROWS_AS(synth::generate(-5, 1), ConfigError);
}
