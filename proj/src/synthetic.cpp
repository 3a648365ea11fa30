// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <set>
#include <sstream>

#include "slu/data.hpp"
#include "slu/error.hpp"

namespace slu {

namespace {

// The last flight template and the first airfare template differ only in their
// final word, so the intent has to be read off the end of the utterance.
const char* const kDefaultGrammar = R"(# airline-domain grammar
lexicon city = boston | denver | dallas | atlanta | pittsburgh | baltimore | philadelphia | oakland | seattle | washington | miami | chicago | new york | san francisco | los angeles | salt lake city | kansas city | las vegas | fort worth | st. louis | san diego | new orleans
lexicon day = monday | tuesday | wednesday | thursday | friday | saturday | sunday
lexicon month = january | february | march | april | may | june | july | august | september | october | november | december
lexicon daynum = first | second | third | fifth | tenth | fifteenth | twentieth | twenty first | twenty third | thirtieth
lexicon period = morning | afternoon | evening | night
lexicon time = 8 am | 9 am | 10 am | noon | 1 pm | 3 pm | 5 pm | 7 pm | 9 pm | midnight
lexicon airline = united | delta | american airlines | us air | continental | northwest | alaska airlines
lexicon class = first class | economy | business class | coach
lexicon trip = round trip | one way
lexicon costrel = cheapest | lowest | least expensive
lexicon airport = logan airport | love field | general mitchell international | stapleton | dulles
lexicon transport = limousine | taxi | rental car | bus
lexicon meal = breakfast | lunch | dinner | snack
lexicon aircraft = boeing 767 | dc 10 | 737 | md 80

template flight = show me flights from {fromloc.city_name:city} to {toloc.city_name:city}
template flight = i want to fly from {fromloc.city_name:city} to {toloc.city_name:city} on {depart_date.day_name:day}
template flight = list {airline_name:airline} flights from {fromloc.city_name:city} to {toloc.city_name:city} in the {depart_time.period_of_day:period}
template flight = i need a {round_trip:trip} flight to {toloc.city_name:city} from {fromloc.city_name:city} on {depart_date.month_name:month} {depart_date.day_number:daynum}
template flight = what flights leave {fromloc.city_name:city} after {depart_time.time:time} going to {toloc.city_name:city}
template flight = i want to arrive in {toloc.city_name:city} before {arrive_time.time:time} leaving from {fromloc.city_name:city}
template flight = from {fromloc.city_name:city} to {toloc.city_name:city} on {depart_date.day_name:day} {depart_time.period_of_day:period} please show me the flights
template airfare = from {fromloc.city_name:city} to {toloc.city_name:city} on {depart_date.day_name:day} {depart_time.period_of_day:period} please show me the fares
template airfare = what is the {cost_relative:costrel} fare from {fromloc.city_name:city} to {toloc.city_name:city}
template airfare = how much is a {class_type:class} ticket from {fromloc.city_name:city} to {toloc.city_name:city}
template airfare = show me {round_trip:trip} fares from {fromloc.city_name:city} to {toloc.city_name:city} on {airline_name:airline}
template ground_service = what ground transportation is available in {city_name:city}
template ground_service = is there a {transport_type:transport} from {airport_name:airport} to downtown {city_name:city}
template ground_service = how do i get from {airport_name:airport} into {city_name:city} by {transport_type:transport}
template airline = which airlines fly from {fromloc.city_name:city} to {toloc.city_name:city}
template airline = does {airline_name:airline} fly between {fromloc.city_name:city} and {toloc.city_name:city}
template flight_time = what time does the {airline_name:airline} flight from {fromloc.city_name:city} arrive in {toloc.city_name:city}
template flight_time = when do flights leave {fromloc.city_name:city} for {toloc.city_name:city} on {depart_date.month_name:month} {depart_date.day_number:daynum}
template meal = what {meal_description:meal} is served on the flight from {fromloc.city_name:city} to {toloc.city_name:city}
template meal = does the {airline_name:airline} flight to {toloc.city_name:city} serve {meal_description:meal}
template aircraft = what type of aircraft is used from {fromloc.city_name:city} to {toloc.city_name:city} in the {depart_time.period_of_day:period}
template aircraft = is the flight to {toloc.city_name:city} on a {aircraft_code:aircraft}
template aircraft = which planes from {fromloc.city_name:city} are a {aircraft_code:aircraft} with {class_type:class} seats
)";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

std::vector<std::string> SyntheticGrammar::intents() const {
  std::set<std::string> seen;
  for (const auto& t : templates) seen.insert(t.intent);
  return {seen.begin(), seen.end()};
}

std::vector<std::string> SyntheticGrammar::slot_types() const {
  std::set<std::string> seen;
  for (const auto& t : templates) {
    for (const auto& p : t.pieces) {
      if (!p.slot.empty()) seen.insert(p.slot);
    }
  }
  return {seen.begin(), seen.end()};
}

SyntheticGrammar parse_grammar(std::istream& in, const std::string& source) {
  SyntheticGrammar g;
  std::vector<std::size_t> template_lines;
  std::string raw;
  std::size_t number = 0;
  auto fail = [&](std::size_t line, const std::string& what) -> void {
    throw_error(ErrorKind::kParse, source + ":" + std::to_string(line) + ": " + what);
  };

  while (std::getline(in, raw)) {
    ++number;
    std::string line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(number, "expected 'lexicon <name> = ...' or 'template <intent> = ...'");
    const auto head = split_words(line.substr(0, eq));
    const std::string body = line.substr(eq + 1);
    if (head.size() != 2) fail(number, "expected a directive and a name before '='");

    if (head[0] == "lexicon") {
      std::vector<std::vector<std::string>> values;
      std::istringstream alts(body);
      std::string alt;
      while (std::getline(alts, alt, '|')) {
        auto words = split_words(alt);
        if (words.empty()) fail(number, "empty value in lexicon '" + head[1] + "'");
        values.push_back(std::move(words));
      }
      if (values.empty()) fail(number, "lexicon '" + head[1] + "' has no values");
      if (!g.lexicons.emplace(head[1], std::move(values)).second) fail(number, "duplicate lexicon '" + head[1] + "'");
    } else if (head[0] == "template") {
      SyntheticGrammar::Template t;
      t.intent = head[1];
      for (auto& w : split_words(body)) {
        if (w.front() == '{') {
          if (w.back() != '}' || w.size() < 3) fail(number, "malformed placeholder '" + w + "'");
          const std::string inner = w.substr(1, w.size() - 2);
          const auto colon = inner.find(':');
          SyntheticGrammar::Piece p;
          p.slot = inner.substr(0, colon);
          p.lexicon = colon == std::string::npos ? p.slot : inner.substr(colon + 1);
          if (p.slot.empty() || p.lexicon.empty()) fail(number, "malformed placeholder '" + w + "'");
          t.pieces.push_back(std::move(p));
        } else {
          t.pieces.push_back({w, "", ""});
        }
      }
      if (t.pieces.empty()) fail(number, "template '" + t.intent + "' has no words");
      g.templates.push_back(std::move(t));
      template_lines.push_back(number);
    } else {
      fail(number, "unknown directive '" + head[0] + "'");
    }
  }

  if (g.templates.empty()) throw_error(ErrorKind::kParse, source + ": grammar has no templates");
  for (std::size_t i = 0; i < g.templates.size(); ++i) {
    for (const auto& p : g.templates[i].pieces) {
      if (!p.slot.empty() && !g.lexicons.count(p.lexicon)) {
        fail(template_lines[i], "unknown lexicon '" + p.lexicon + "'");
      }
    }
  }
  return g;
}

SyntheticGrammar parse_grammar_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse_grammar(in, source);
}

SyntheticGrammar load_grammar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorKind::kIo, "cannot open grammar file '" + path + "'");
  return parse_grammar(in, path);
}

const std::string& default_grammar_text() {
  static const std::string text = kDefaultGrammar;
  return text;
}

const SyntheticGrammar& default_grammar() {
  static const SyntheticGrammar g = parse_grammar_text(default_grammar_text(), "<default grammar>");
  return g;
}

std::vector<Utterance> generate_synthetic(const SyntheticGrammar& grammar, std::size_t n, std::uint64_t seed) {
  if (grammar.templates.empty()) throw_error(ErrorKind::kDomain, "grammar has no templates");
  Rng rng(seed);
  std::vector<Utterance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = grammar.templates[rng.below(grammar.templates.size())];
    Utterance u;
    u.intent = t.intent;
    for (const auto& p : t.pieces) {
      if (p.slot.empty()) {
        u.tokens.push_back(p.word);
        u.slots.push_back("O");
        continue;
      }
      const auto& values = grammar.lexicons.at(p.lexicon);
      const auto& words = values[rng.below(values.size())];
      for (std::size_t w = 0; w < words.size(); ++w) {
        u.tokens.push_back(words[w]);
        u.slots.push_back((w == 0 ? "B-" : "I-") + p.slot);
      }
    }
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace slu
