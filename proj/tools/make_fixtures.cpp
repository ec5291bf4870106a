// Generates the bundled synthetic fixtures: a patent corpus whose abstracts
// and claims carry extractable relation cues, a small multiple-choice
// benchmark tied to the corpus facts, and a mixed 50-triple knowledge file.
// Deterministic for a given seed, so the checked-in data can be regenerated.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kft/common/rng.hpp"
#include "kft/corpus/patent.hpp"
#include "kft/kgraph/schema.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using kft::Rng;

namespace {

const std::vector<std::string> kDevices = {
    "piezoelectric actuator", "microfluidic pump",     "optical resonator",
    "magnetic clutch",        "thermal regulator",     "plasma emitter",
    "capacitive sensor",      "hydraulic damper",      "ultrasonic transducer",
    "resonant gyroscope"};

const std::vector<std::string> kMaterials = {
    "titanium alloy", "carbon fiber",   "ceramic composite", "polymer resin",
    "graphene layer", "silicon carbide", "copper mesh",       "glass substrate"};

const std::vector<std::string> kMethods = {
    "laser sintering",     "vapor deposition", "pulse modulation",
    "thermal annealing",   "signal filtering", "catalytic conversion",
    "injection molding",   "feedback control"};

const std::vector<std::string> kPurposes = {
    "precision valve control", "wireless power transfer", "vibration damping",
    "battery cooling",         "gas separation",          "image denoising",
    "surface hardening",       "flow regulation",         "error correction",
    "data compression"};

const std::vector<std::string> kCategories = {
    "actuator assembly", "sensing apparatus", "control unit", "transport mechanism"};

std::string cap_words(const std::string& s) {
  std::string out = s;
  bool start = true;
  for (auto& c : out) {
    if (start && c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    start = c == ' ';
  }
  return out;
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.next_below(v.size())];
}

template <class T>
const T& pick_other(Rng& rng, const std::vector<T>& v, const T& not_this) {
  while (true) {
    const T& c = pick(rng, v);
    if (c != not_this) return c;
  }
}

void write_corpus(const fs::path& path, int n_docs, uint64_t seed) {
  Rng rng(seed);
  std::ofstream out(path, std::ios::binary);
  for (int i = 0; i < n_docs; ++i) {
    size_t di = rng.next_below(kDevices.size());
    const std::string& device = kDevices[di];
    // each device has one canonical purpose so the benchmark answers are
    // grounded in the corpus statistics
    const std::string& purpose1 = kPurposes[di];
    const std::string& purpose2 = pick_other(rng, kPurposes, purpose1);
    const std::string& material = pick(rng, kMaterials);
    const std::string& method = pick(rng, kMethods);
    const std::string& category = kCategories[di % kCategories.size()];

    std::string title =
        cap_words(device) + " with " + cap_words(material) + " for " + cap_words(purpose1);

    std::string abs_text = "This invention discloses a " + device + " for " +
                           purpose1 + ". The " + device + " is used for " +
                           purpose1 + ". The " + material + " is a part of the " +
                           device + ". The " + method + " is a feature of the " +
                           device + ".";
    if (rng.next_double() < 0.5) {
      abs_text += " The " + device + " is a type of " + category + ".";
    }
    if (rng.next_double() < 0.35) {
      const std::string& device2 = pick_other(rng, kDevices, device);
      abs_text += " The " + device + " is comparable to the " + device2 + ".";
    }
    if (rng.next_double() < 0.35) {
      const std::string& method2 = pick_other(rng, kMethods, method);
      abs_text += " The " + method + " is used in conjunction with the " + method2 + ".";
    }
    abs_text += " The " + method + " enables " + purpose2 + " in demanding environments.";

    std::vector<std::string> claims;
    claims.push_back("A " + device + " comprising a " + material + " and a " +
                     method + " module.");
    claims.push_back("The " + device + " of claim 1, wherein the " + method +
                     " provides " + purpose2 + ".");
    if (rng.next_double() < 0.5) {
      const std::string& material2 = pick_other(rng, kMaterials, material);
      claims.push_back("The " + device + " of claim 2, further comprising a " +
                       material2 + " layer.");
    }

    json j;
    char id[32];
    std::snprintf(id, sizeof(id), "SYN-%04d", i + 1);
    j["id"] = id;
    j["ipc"] = std::string(1, static_cast<char>('A' + i % 8));
    j["title"] = title;
    j["abstract"] = abs_text;
    j["claims"] = claims;
    out << j.dump() << "\n";
  }
}

void write_mcq(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  for (size_t i = 0; i < kDevices.size(); ++i) {
    std::string correct = kPurposes[i];
    std::vector<std::string> choices = {correct, kPurposes[(i + 3) % kPurposes.size()],
                                        kPurposes[(i + 5) % kPurposes.size()],
                                        kPurposes[(i + 7) % kPurposes.size()]};
    int answer = static_cast<int>((i * 7 + 1) % 4);
    std::swap(choices[0], choices[static_cast<size_t>(answer)]);
    json j;
    j["question"] = "What is the " + kDevices[i] + " used for?";
    j["choices"] = choices;
    j["answer"] = answer;
    out << j.dump() << "\n";
  }
}

void write_triples(const fs::path& path) {
  using kft::kgraph::RelationType;
  const std::vector<std::pair<std::string, RelationType>> relations = {
      {"Used-for", RelationType::UsedFor},     {"Feature-of", RelationType::FeatureOf},
      {"Hyponym-of", RelationType::HyponymOf}, {"Part-of", RelationType::PartOf},
      {"Compare", RelationType::Compare},      {"Conjunction", RelationType::Conjunction}};
  std::ofstream out(path, std::ios::binary);
  auto entity = [](const std::string& name, const std::string& type) {
    return json{{"name", name}, {"type", type}, {"desc", ""}};
  };
  for (int i = 0; i < 50; ++i) {
    const auto& [rname, rel] = relations[static_cast<size_t>(i) % relations.size()];
    const std::string& a = kDevices[static_cast<size_t>(i) % kDevices.size()];
    const std::string& b = kPurposes[static_cast<size_t>(i * 3 + 1) % kPurposes.size()];
    json j;
    // alternate symmetric-relation operand order so canonicalization has
    // something to do; duplicate keys appear with different strengths
    bool flip = kft::kgraph::is_symmetric(rel) && i % 2 == 1;
    j["h"] = entity(flip ? b : a, "Method");
    j["r"] = rname;
    j["t"] = entity(flip ? a : b, "Task");
    j["strength"] = 1 + i % 5;
    j["source_doc"] = "fixture";
    out << j.dump() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic fixture generator"};
  std::string out_dir = "data";
  int docs = 400;
  uint64_t seed = 7;
  app.add_option("--out-dir", out_dir, "target directory");
  app.add_option("--docs", docs, "number of synthetic patents");
  app.add_option("--seed", seed, "generation seed");
  CLI11_PARSE(app, argc, argv);

  fs::create_directories(out_dir);
  write_corpus(fs::path(out_dir) / "corpus.jsonl", docs, seed);
  write_mcq(fs::path(out_dir) / "mcq.jsonl");
  write_triples(fs::path(out_dir) / "triples_50.jsonl");
  std::cout << "fixtures written to " << out_dir << "\n";
  return 0;
}
