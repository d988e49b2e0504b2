#include <fstream>
#include <functional>

#include "json.hpp"
#include "relkit/data_model.hpp"
#include "relkit/error.hpp"

namespace relkit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void for_each_jsonl(const fs::path& path, const std::function<void(const json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(path.filename().string() + ":" + std::to_string(lineno) +
                      ": malformed line: " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

AudioTextPair pair_from_json(const json& j) {
  AudioTextPair p;
  p.pair_id = j.at("pair_id").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.audio_ref = j.at("audio_ref").get<std::string>();
  p.origin = parse_origin(j.at("origin").get<std::string>());
  p.event_labels = j.at("event_labels").get<std::vector<std::string>>();
  for (const auto& c : j.at("top_categories")) p.top_categories.insert(parse_top_category(c.get<std::string>()));
  p.is_anchor = j.at("is_anchor").get<bool>();
  p.duration_s = j.at("duration_s").get<double>();
  return p;
}

json pair_to_json(const AudioTextPair& p) {
  json cats = json::array();
  for (auto c : p.top_categories.members()) cats.push_back(std::string(to_string(c)));
  return json{{"pair_id", p.pair_id},
              {"text", p.text},
              {"audio_ref", p.audio_ref},
              {"origin", std::string(to_string(p.origin))},
              {"event_labels", p.event_labels},
              {"top_categories", cats},
              {"is_anchor", p.is_anchor},
              {"duration_s", p.duration_s}};
}

std::string question_key(std::size_t q) {
  return (q < 9 ? "q0" : "q") + std::to_string(q + 1);
}

ListenerProfile listener_from_json(const json& j) {
  ListenerProfile l(j.at("listener_id").get<std::string>());
  for (std::size_t q = 0; q < kNumQuestions; ++q) {
    auto key = question_key(q);
    if (!j.contains(key) || j[key].is_null()) continue;
    auto code = j[key].get<std::string>();
    if (!is_valid_answer(q, code)) throw DataError("invalid answer '" + code + "' for " + key);
    l.answers[q] = std::move(code);
  }
  return l;
}

json listener_to_json(const ListenerProfile& l) {
  json j{{"listener_id", l.listener_id}};
  for (std::size_t q = 0; q < kNumQuestions; ++q) j[question_key(q)] = l.answers[q];
  return j;
}

EvaluationRecord record_from_json(const json& j) {
  EvaluationRecord r;
  r.listener_id = j.at("listener_id").get<std::string>();
  r.pair_id = j.at("pair_id").get<std::string>();
  r.metric = parse_metric(j.at("metric").get<std::string>());
  const auto& score = j.at("score");
  if (!score.is_number_integer()) throw DataError("score must be an integer");
  r.score = score.get<int>();
  if (r.score < kMinScore || r.score > kMaxScore)
    throw DataError("score out of range: " + std::to_string(r.score));
  r.split = parse_split(j.at("split").get<std::string>());
  return r;
}

json record_to_json(const EvaluationRecord& r) {
  return json{{"listener_id", r.listener_id},
              {"pair_id", r.pair_id},
              {"metric", std::string(to_string(r.metric))},
              {"score", r.score},
              {"split", std::string(to_string(r.split))}};
}

void write_lines(const fs::path& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& row : rows) out << row.dump() << '\n';
}

}  // namespace

Dataset load_dataset(const fs::path& root) {
  Dataset d;
  for_each_jsonl(root / "pairs.jsonl", [&](const json& j) {
    auto p = pair_from_json(j);
    auto id = p.pair_id;
    if (!d.pairs.emplace(id, std::move(p)).second) throw DataError("duplicate pair_id '" + id + "'");
  });
  for_each_jsonl(root / "listeners.jsonl", [&](const json& j) {
    auto l = listener_from_json(j);
    auto id = l.listener_id;
    if (!d.listeners.emplace(id, std::move(l)).second)
      throw DataError("duplicate listener_id '" + id + "'");
  });
  for_each_jsonl(root / "evaluations.jsonl",
                 [&](const json& j) { d.records.push_back(record_from_json(j)); });
  validate(d);
  return d;
}

void save_dataset(const Dataset& d, const fs::path& root) {
  fs::create_directories(root);
  std::vector<json> rows;
  for (const auto& [id, p] : d.pairs) rows.push_back(pair_to_json(p));
  write_lines(root / "pairs.jsonl", rows);
  rows.clear();
  for (const auto& [id, l] : d.listeners) rows.push_back(listener_to_json(l));
  write_lines(root / "listeners.jsonl", rows);
  rows.clear();
  for (const auto& r : d.records) rows.push_back(record_to_json(r));
  write_lines(root / "evaluations.jsonl", rows);
}

}  // namespace relkit
