#include "dualnlu/synth.hpp"

#include <map>
#include <set>
#include <sstream>
#include <string>

namespace dualnlu::synth {

namespace {

struct Template {
  std::string intent;
  std::string pattern;  // "$Slot" tokens are placeholders
};

const std::vector<Template>& templates() {
  static const std::vector<Template> t{
      // find_flight
      {"find_flight", "book a flight from $FromCity to $ToCity"},
      {"find_flight", "find flights from $FromCity to $ToCity on $Date"},
      {"find_flight", "i need a $Airline flight to $ToCity"},
      {"find_flight", "show me flights to $ToCity leaving $Date"},
      {"find_flight", "are there $Airline flights from $FromCity on $Date"},
      {"find_flight", "fly me from $FromCity to $ToCity"},
      {"find_flight", "what flights leave $FromCity on $Date"},
      {"find_flight", "search for a flight on $Airline from $FromCity to $ToCity"},
      {"find_flight", "i want to fly to $ToCity on $Date"},
      {"find_flight", "get me a ticket from $FromCity to $ToCity $Date"},
      {"find_flight", "list $Airline departures from $FromCity"},
      {"find_flight", "any flight to $ToCity $Date morning"},
      {"find_flight", "cheapest flight from $FromCity to $ToCity please"},
      {"find_flight", "does $Airline fly from $FromCity to $ToCity"},
      {"find_flight", "show me a flight that leaves $Date for $ToCity"},
      {"find_flight", "i would like to book the $Date flight to $ToCity"},
      // book_hotel
      {"book_hotel", "book a room at $HotelName in $ToCity"},
      {"book_hotel", "reserve the $HotelName for $Date"},
      {"book_hotel", "i need a hotel in $ToCity on $Date"},
      {"book_hotel", "find me a room in $ToCity"},
      {"book_hotel", "is the $HotelName available on $Date"},
      {"book_hotel", "get me a reservation at $HotelName"},
      {"book_hotel", "book the $HotelName in $ToCity for $Date"},
      {"book_hotel", "i want to stay at $HotelName"},
      {"book_hotel", "any rooms in $ToCity for $Date"},
      {"book_hotel", "reserve a suite at the $HotelName $Date"},
      {"book_hotel", "hotel in $ToCity please"},
      {"book_hotel", "check prices at $HotelName for $Date"},
      {"book_hotel", "i would like a room at $HotelName in $ToCity"},
      {"book_hotel", "need a place to stay in $ToCity $Date"},
      // play_music
      {"play_music", "play some $Artist"},
      {"play_music", "play $Artist for me"},
      {"play_music", "put on music by $Artist"},
      {"play_music", "i want to hear $Artist"},
      {"play_music", "start playing $Artist songs"},
      {"play_music", "queue up $Artist"},
      {"play_music", "can you play $Artist now"},
      {"play_music", "play the best of $Artist"},
      {"play_music", "put $Artist on the speakers"},
      {"play_music", "music by $Artist please"},
      {"play_music", "play something"},
      {"play_music", "put on some music"},
  };
  return t;
}

const std::map<std::string, std::vector<Tokens>>& lexicons() {
  static const std::map<std::string, std::vector<Tokens>> l{
      {"FromCity",
       {{"boston"},
        {"denver"},
        {"chicago"},
        {"seattle"},
        {"atlanta"},
        {"dallas"},
        {"new", "york"},
        {"san", "francisco"},
        {"los", "angeles"},
        {"salt", "lake", "city"}}},
      {"ToCity",
       {{"boston"},
        {"denver"},
        {"chicago"},
        {"seattle"},
        {"atlanta"},
        {"dallas"},
        {"miami"},
        {"new", "york"},
        {"san", "francisco"},
        {"los", "angeles"},
        {"salt", "lake", "city"}}},
      {"Date",
       {{"monday"},
        {"tuesday"},
        {"wednesday"},
        {"thursday"},
        {"friday"},
        {"saturday"},
        {"sunday"},
        {"today"},
        {"tomorrow"},
        {"next", "week"}}},
      {"Airline",
       {{"delta"}, {"united"}, {"lufthansa"}, {"american", "airlines"}, {"air", "france"}}},
      {"HotelName",
       {{"grand", "plaza"},
        {"hilton"},
        {"seaside", "inn"},
        {"royal", "palm"},
        {"city", "lodge"},
        {"marriott"},
        {"golden", "gate", "hotel"},
        {"lake", "view", "resort"}}},
      {"Artist",
       {{"miles", "davis"},
        {"the", "beatles"},
        {"nina", "simone"},
        {"daft", "punk"},
        {"johnny", "cash"},
        {"billie", "holiday"},
        {"queen"},
        {"radiohead"},
        {"ella", "fitzgerald"},
        {"john", "coltrane"}}},
  };
  return l;
}

LabeledExample realize(const Template& tpl, Rng& rng) {
  LabeledExample ex;
  ex.intent = tpl.intent;
  std::istringstream is(tpl.pattern);
  std::string tok;
  while (is >> tok) {
    if (tok[0] == '$') {
      const auto& values = lexicons().at(tok.substr(1));
      const Tokens& value = values[rng.below(values.size())];
      for (size_t i = 0; i < value.size(); ++i) {
        ex.tokens.push_back(value[i]);
        ex.tags.push_back((i == 0 ? "B-" : "I-") + tok.substr(1));
      }
    } else {
      ex.tokens.push_back(tok);
      ex.tags.push_back("O");
    }
  }
  return ex;
}

}  // namespace

std::vector<LabeledExample> generate(int total, uint64_t seed) {
  if (total < 1) throw ConfigError("synthetic corpus size must be positive");
  Rng rng(Rng::mix(seed, 0x5e17));
  std::vector<LabeledExample> out;
  std::set<std::pair<std::string, Tokens>> seen;  // (intent, tokens) identifies an example
  long since_last_new = 0;  // long dry streak == grammar effectively exhausted
  while (static_cast<int>(out.size()) < total) {
    if (++since_last_new > 100000)
      throw ConfigError("synthetic grammar cannot produce " + std::to_string(total) +
                        " distinct examples; exhausted at " + std::to_string(out.size()));
    const Template& tpl = templates()[rng.below(templates().size())];
    LabeledExample ex = realize(tpl, rng);
    if (seen.insert({ex.intent, ex.tokens}).second) {
      out.push_back(std::move(ex));
      since_last_new = 0;
    }
  }
  return out;
}

}  // namespace dualnlu::synth
