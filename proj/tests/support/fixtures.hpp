#pragma once

// Deterministic fixtures shared by the unit, CLI, and acceptance suites.
//
// The planted toolset holds 20 topics x 3 near-duplicate tools. Within a
// topic the tools share signature shape and an identical description; names
// are permutations/synonym variants that the rule classifier recognizes, so
// the whole triple merges into one representative. Every benchmark query
// pairs two topics (two plan steps); its gold labels are the
// lexicographically last member of each triple, which pre-merge retrieval
// tends to push out of the top-5 in favor of the duplicates.

#include <string>
#include <vector>

#include "toolfuse/core.hpp"

namespace toolfuse::testing {

struct PlantedTopic {
  std::vector<std::string> names;  // 3 equivalent variants
  std::string params;              // signature tail, appended to each name
  std::string description;
  std::string step;                // benchmark plan step targeting the topic
};

inline const std::vector<PlantedTopic>& planted_topics() {
  static const std::vector<PlantedTopic> topics = {
      {{"convert_currency", "currency_converter", "currency_conversion"},
       "(amount: float, from_code: str, to_code: str)",
       "Convert a monetary amount between two currency codes using the latest published foreign "
       "exchange rates. Accepts ISO currency codes such as USD or EUR and returns the converted "
       "monetary amount rounded to two decimal places.",
       "convert 250 US dollars into euros using the latest published foreign exchange rates"},
      {{"get_weather", "fetch_weather", "weather_lookup"},
       "(city: str, units: str = 'metric')",
       "Get the current weather conditions and tomorrow's forecast for a given city name, "
       "including air temperature, humidity, wind speed, and precipitation probability in the "
       "requested measurement units.",
       "look up the current weather conditions, humidity and wind speed for Paris"},
      {{"send_message", "send_msg", "message_send"},
       "(recipient: str, body: str)",
       "Send a short text message to the given recipient address or phone number. The message "
       "body is delivered immediately over the default messaging channel and a delivery receipt "
       "identifier is returned.",
       "send a short text message with a delivery receipt to Alice's phone number"},
      {{"calculate_triangle_area", "calc_area_triangle", "compute_triangle_area"},
       "(base: float, height: float)",
       "Calculate the area of a triangle given the lengths of its base and height. The result "
       "uses the standard geometric half base times height formula and is returned in square "
       "units of the inputs.",
       "calculate the area of a triangle with base 3 and height 4 in square units"},
      {{"translate_text", "text_translation", "text_translate"},
       "(text: str, target_language: str)",
       "Translate a piece of text from one natural language into a target language while "
       "preserving tone and formatting. Supports common language codes and returns the "
       "translated passage as plain text.",
       "translate this paragraph of text into the German language preserving tone"},
      {{"get_stock_price", "fetch_stock_price", "stock_price_lookup"},
       "(ticker: str)",
       "Get the latest stock market price quote for a company ticker symbol, including the "
       "current trading price, daily percentage change, and the timestamp of the most recent "
       "trade on the exchange.",
       "look up the latest stock market price quote and daily change for the AAPL ticker"},
      {{"calculate_tip", "tip_calc", "compute_tip"},
       "(bill: float, percent: float = 15.0)",
       "Calculate the tip amount for a restaurant bill at a chosen gratuity percentage and "
       "return both the tip and the grand total. Useful for splitting checks after dining "
       "out with a group.",
       "calculate a twenty percent gratuity tip on an 84 dollar restaurant bill"},
      {{"schedule_meeting_room", "meeting_room_schedule", "room_meeting_schedule"},
       "(room: str, start: str, end: str)",
       "Schedule a meeting room reservation for the requested time window, checking the room "
       "calendar for conflicts and booking the slot when it is free. Returns the confirmed "
       "reservation identifier.",
       "schedule a meeting room reservation for tomorrow between 10am and 11am"},
      {{"get_user_details", "fetch_user_info", "user_details_lookup"},
       "(user_id: str)",
       "Get profile details such as display name, email address, and account creation date "
       "for a registered user account. The lookup is read-only and never modifies the stored "
       "profile record.",
       "look up the profile details and email address for user account 4711"},
      {{"delete_file", "remove_file", "file_delete"},
       "(path: str, recursive: bool = False)",
       "Delete a file or directory from the workspace at the given path. Directories require "
       "the recursive flag, and the operation reports how many filesystem entries were removed "
       "in total.",
       "delete the old report file from the workspace path"},
      {{"calculate_bmi", "bmi_calc", "compute_bmi"},
       "(weight_kg: float, height_m: float)",
       "Calculate the body mass index from a person's weight in kilograms and height in "
       "meters, returning the numeric index together with the conventional underweight, "
       "normal, or overweight category.",
       "calculate the body mass index category for 70 kilograms and 1.75 meters"},
      {{"calculate_distance", "distance_calc", "compute_distance"},
       "(lat1: float, lon1: float, lat2: float, lon2: float)",
       "Calculate the great-circle distance between two geographic coordinate pairs expressed "
       "in decimal degrees, returning kilometers by default. Uses a spherical earth model "
       "suitable for routing estimates.",
       "calculate the great-circle distance in kilometers between two geographic coordinates"},
      {{"get_news_headlines", "fetch_news_headlines", "news_headlines_lookup"},
       "(category: str = 'top')",
       "Get the latest news headlines for a category such as sports, business, or technology. "
       "Each headline comes with its source outlet and publication time so stories can be "
       "cited properly.",
       "look up the latest news headlines with sources in the business category"},
      {{"convert_timezone", "timezone_conversion", "timezone_converter"},
       "(timestamp: str, from_zone: str, to_zone: str)",
       "Convert a timestamp from one timezone to another timezone identifier, observing "
       "daylight saving rules for both zones. Accepts IANA zone names and returns the adjusted "
       "local timestamp.",
       "convert 5pm Tokyo time into the New York timezone observing daylight saving"},
      {{"convert_temperature", "temp_conversion", "temperature_converter"},
       "(value: float, from_unit: str, to_unit: str)",
       "Convert a temperature reading between celsius, fahrenheit, and kelvin units. The "
       "converted temperature value is returned with one decimal place of precision for "
       "display in dashboards.",
       "convert 98 degrees fahrenheit into celsius temperature units"},
      {{"calculate_interest", "interest_calc", "compute_interest"},
       "(principal: float, rate: float, years: int)",
       "Calculate compound interest earned on a principal amount at a yearly percentage rate "
       "over a number of years, returning the final balance and the interest portion "
       "separately.",
       "calculate the compound interest on 1000 principal at five percent over ten years"},
      {{"book_flight_ticket", "flight_ticket_book", "ticket_flight_book"},
       "(origin: str, destination: str, date: str)",
       "Book a flight ticket between two airports on the requested travel date, choosing the "
       "cheapest available economy fare and returning the booking confirmation code for the "
       "itinerary.",
       "book the cheapest economy flight ticket from SFO to JFK next Friday"},
      {{"generate_password", "password_gen", "pwd_generate"},
       "(length: int = 16, symbols: bool = True)",
       "Generate a strong random password with the requested length, mixing upper and lower "
       "case letters, digits, and optional punctuation symbols suitable for new account "
       "credentials.",
       "generate a strong random password of length twenty with punctuation symbols"},
      {{"create_music_playlist", "music_playlist_create", "playlist_music_create"},
       "(title: str, genre: str)",
       "Create a new music playlist with the given title and seed it with popular tracks from "
       "the chosen genre. The playlist starts private and can be shared later from the "
       "library.",
       "create a new music playlist titled focus seeded with jazz tracks"},
      {{"search_recipe", "recipe_search", "find_recipe"},
       "(ingredients: str, cuisine: str = 'any')",
       "Search for a cooking recipe matching the listed ingredients and an optional cuisine "
       "style, ranking results by preparation time and returning step-by-step cooking "
       "instructions.",
       "search for a cooking recipe using tomatoes and basil with quick preparation"},
  };
  return topics;
}

inline Toolset planted_toolset() {
  std::vector<ToolSpec> tools;
  for (const PlantedTopic& topic : planted_topics()) {
    for (const std::string& name : topic.names) {
      ToolSpec tool;
      tool.id = name;
      tool.name = name;
      tool.signature = name + topic.params;
      tool.description = topic.description;
      tools.push_back(std::move(tool));
    }
  }
  return Toolset(std::move(tools), "planted60");
}

// Lexicographically last member of a topic's triple: the gold label.
inline std::string planted_gold(const PlantedTopic& topic) {
  std::string last = topic.names.front();
  for (const std::string& name : topic.names) {
    last = std::max(last, name);
  }
  return last;
}

inline Benchmark planted_benchmark(const Toolset& toolset) {
  const auto& topics = planted_topics();
  std::vector<QueryRecord> records;
  for (std::size_t i = 0; i < topics.size(); ++i) {
    const PlantedTopic& first = topics[i];
    const PlantedTopic& second = topics[(i + 7) % topics.size()];
    QueryRecord record;
    record.query_id = "q" + std::to_string(i);
    record.query = "First, " + first.step + ". Then, " + second.step + ".";
    record.subqueries = {first.step, second.step};
    record.gold_tools = {planted_gold(first), planted_gold(second)};
    records.push_back(std::move(record));
  }
  Benchmark benchmark(std::move(records));
  for (const QueryRecord& record : benchmark.records()) {
    for (const std::string& gold : record.gold_tools) {
      if (!toolset.contains(gold)) {
        throw InputError("planted fixture: gold id missing: " + gold);
      }
    }
  }
  return benchmark;
}

// Synthetic wide toolset for context-length accounting.
inline Toolset big_toolset(std::size_t count) {
  static const std::vector<std::string> verbs = {"compute", "fetch", "convert", "schedule",
                                                 "rank",    "parse", "encode",  "resolve"};
  static const std::vector<std::string> nouns = {"invoice", "route",   "ledger", "forecast",
                                                 "profile", "segment", "digest", "inventory"};
  std::vector<ToolSpec> tools;
  tools.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string& verb = verbs[i % verbs.size()];
    const std::string& noun = nouns[(i / verbs.size()) % nouns.size()];
    ToolSpec tool;
    tool.id = "tool_" + std::to_string(i);
    tool.name = verb + "_" + noun + "_" + std::to_string(i);
    tool.signature = tool.name + "(payload: dict, mode: str = 'default')";
    tool.description = "Variant " + std::to_string(i) + ": " + verb + " the " + noun +
                       " records and return a structured summary for downstream steps.";
    tools.push_back(std::move(tool));
  }
  return Toolset(std::move(tools), "big" + std::to_string(count));
}

inline Benchmark big_benchmark(const Toolset& toolset, std::size_t queries) {
  std::vector<QueryRecord> records;
  for (std::size_t i = 0; i < queries; ++i) {
    const ToolSpec& tool = toolset.at(i * 37 % toolset.size());
    QueryRecord record;
    record.query_id = "bq" + std::to_string(i);
    record.query = "please " + tool.description;
    record.gold_tools = {tool.id};
    records.push_back(std::move(record));
  }
  return Benchmark(std::move(records));
}

}  // namespace toolfuse::testing
