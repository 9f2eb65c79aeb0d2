#pragma once

#include <vector>

#include "dualnlu/rng.hpp"
#include "dualnlu/types.hpp"

namespace dualnlu::synth {

// Deterministic synthetic corpus over three intents (find_flight,
// book_hotel, play_music) and six slots (FromCity, ToCity, Date, Airline,
// HotelName, Artist). Sampling templates and lexicon values until `total`
// distinct examples exist; the same seed always yields the same corpus.
std::vector<LabeledExample> generate(int total, uint64_t seed);

}  // namespace dualnlu::synth
