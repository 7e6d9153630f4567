#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "tdps/claimsgen/types.hpp"

namespace tdps::claimsgen {

struct CorpusPatient {
  std::string patient_id;
  RecordSequence seq;
};

// Patients grouped from a `patient_id,date,code` CSV. Codes are densely
// indexed in lexicographic order of their names.
struct Corpus {
  std::vector<std::string> vocabulary;
  std::vector<CorpusPatient> patients;
  std::size_t dropped_short = 0;  // patients with fewer than two records

  std::optional<Code> code_index(const std::string& name) const;
};

Corpus ingest_corpus(const std::filesystem::path& path);
Corpus ingest_corpus(std::istream& in);

// Semi-synthetic labels on the cohort of patients where both scenario codes occur
// at record distance >= 1. Throws ScenarioError on an empty cohort.
ClaimsDataset inject_semisynthetic(const Corpus& corpus, const ScenarioSpec& spec, std::uint64_t seed);

}  // namespace tdps::claimsgen
