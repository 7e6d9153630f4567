#include "tdps/claimsgen/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tdps/claimsgen/scenario.hpp"
#include "tdps/error.hpp"
#include "tdps/rng.hpp"

namespace tdps::claimsgen {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool is_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
    return false;
  }
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[i] < '0' || s[i] > '9') {
      return false;
    }
  }
  const int year = std::stoi(s.substr(0, 4));
  const int month = std::stoi(s.substr(5, 2));
  const int day = std::stoi(s.substr(8, 2));
  if (month < 1 || month > 12 || day < 1) {
    return false;
  }
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  const int max_day = kDays[month - 1] + (month == 2 && leap ? 1 : 0);
  return day <= max_day;
}

}  // namespace

std::optional<Code> Corpus::code_index(const std::string& name) const {
  const auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), name);
  if (it == vocabulary.end() || *it != name) {
    return std::nullopt;
  }
  return static_cast<Code>(it - vocabulary.begin());
}

Corpus ingest_corpus(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw IngestionError("corpus is empty; expected header 'patient_id,date,code'");
  }
  ++line_no;
  if (trim(line) != "patient_id,date,code") {
    throw IngestionError("line 1: expected header 'patient_id,date,code'");
  }

  // ISO dates sort lexicographically in chronological order.
  std::map<std::string, std::map<std::string, std::set<std::string>>> grouped;
  std::set<std::string> names;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      fields.push_back(trim(field));
    }
    if (!line.empty() && line.back() == ',') {
      fields.emplace_back();
    }
    if (fields.size() != 3 || fields[0].empty() || fields[2].empty()) {
      throw IngestionError("line " + std::to_string(line_no) + ": malformed row, expected patient_id,date,code");
    }
    if (!is_iso_date(fields[1])) {
      throw IngestionError("line " + std::to_string(line_no) + ": unknown date format '" + fields[1] +
                           "', expected YYYY-MM-DD");
    }
    grouped[fields[0]][fields[1]].insert(fields[2]);
    names.insert(fields[2]);
  }

  Corpus corpus;
  corpus.vocabulary.assign(names.begin(), names.end());
  for (const auto& [patient, by_date] : grouped) {
    if (by_date.size() < 2) {
      ++corpus.dropped_short;
      continue;
    }
    CorpusPatient p;
    p.patient_id = patient;
    for (const auto& [date, codes] : by_date) {
      CodeSet record;
      for (const auto& name : codes) {
        record.push_back(*corpus.code_index(name));
      }
      canonicalize(record);
      p.seq.records.push_back(std::move(record));
    }
    corpus.patients.push_back(std::move(p));
  }
  return corpus;
}

Corpus ingest_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open corpus file " + path.string());
  }
  return ingest_corpus(in);
}

ClaimsDataset inject_semisynthetic(const Corpus& corpus, const ScenarioSpec& spec, std::uint64_t seed) {
  if (spec.kind != ScenarioKind::SemiSyntheticDistance) {
    throw ConfigError("injection requires the semisynthetic_distance scenario");
  }
  spec.validate(corpus.vocabulary.size());

  ClaimsDataset data;
  data.dx = corpus.vocabulary.size();
  data.scenario = spec;
  data.seed = seed;
  data.vocabulary = corpus.vocabulary;
  for (std::size_t i = 0; i < corpus.patients.size(); ++i) {
    const auto& patient = corpus.patients[i];
    const auto d = distance_feature(patient.seq, spec.code_a, *spec.code_b);
    if (!d || *d == 0) {
      continue;
    }
    Rng rng(derive_seed(seed, "inject", i));
    data.samples.push_back(label_sample(i, patient.seq, spec, rng));
  }
  if (data.samples.empty()) {
    throw ScenarioError("semi-synthetic cohort is empty: no patient has both codes at distance >= 1");
  }
  return data;
}

}  // namespace tdps::claimsgen
