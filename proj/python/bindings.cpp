// Python bindings for the core operations: text metrics, tokenization,
// knowledge-graph extraction/verbalization, structural draft checks, and a
// small language-model wrapper covering pretraining, fine-tuning, and
// generation.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kft/common/error.hpp"
#include "kft/common/rng.hpp"
#include "kft/corpus/dataset.hpp"
#include "kft/corpus/tokenizer.hpp"
#include "kft/eval/embedder.hpp"
#include "kft/eval/metrics.hpp"
#include "kft/eval/reasonability.hpp"
#include "kft/kgraph/extract.hpp"
#include "kft/kgraph/schema.hpp"
#include "kft/lm/checkpoint.hpp"
#include "kft/lm/forward.hpp"
#include "kft/lm/model.hpp"
#include "kft/train/stages.hpp"

namespace py = pybind11;
using namespace kft;

namespace {

// Bundles a model with the vocabulary it was trained against so Python users
// cannot mix them up; save/load persist both files side by side.
class LanguageModel {
 public:
  LanguageModel(lm::ModelState model, corpus::Vocab vocab)
      : model_(std::move(model)), vocab_(std::move(vocab)) {}

  static LanguageModel pretrain(const std::vector<std::string>& texts, int d_model,
                                int n_heads, int n_layers, int d_ff, int max_seq,
                                int vocab_cap, int steps, double learning_rate,
                                uint64_t seed) {
    corpus::Vocab vocab = corpus::build_vocab_from_texts(texts, vocab_cap);
    lm::ModelConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.d_model = d_model;
    cfg.n_heads = n_heads;
    cfg.n_layers = n_layers;
    cfg.d_ff = d_ff;
    cfg.max_seq = max_seq;
    cfg.seed = derive_seed(seed, "init");
    train::TrainConfig tc;
    tc.learning_rate = learning_rate;
    tc.epochs = 1;
    tc.max_steps = steps;
    tc.alpha = 0.0;
    tc.seed = derive_seed(seed, "pretrain");
    auto res = train::run_pretrain(lm::init_model(cfg), {}, texts, vocab, tc);
    return LanguageModel(std::move(res.model), std::move(vocab));
  }

  void fine_tune(const std::vector<std::pair<std::string, std::string>>& pairs,
                 int steps, double learning_rate, uint64_t seed) {
    std::vector<corpus::DialoguePair> dps;
    dps.reserve(pairs.size());
    for (const auto& [q, a] : pairs) {
      dps.push_back({q, a, corpus::TaskKind::Title});
    }
    train::TrainConfig tc;
    tc.learning_rate = learning_rate;
    tc.epochs = 1;
    tc.max_steps = steps;
    tc.seed = derive_seed(seed, "sft");
    auto res = train::run_sft(std::move(model_), dps, vocab_, tc);
    model_ = std::move(res.model);
  }

  std::string generate(const std::string& prompt, int max_new_tokens,
                       double temperature, bool greedy, uint64_t seed) const {
    std::vector<int> toks = {corpus::Vocab::kBos};
    auto enc = corpus::encode(prompt, vocab_);
    toks.insert(toks.end(), enc.ids.begin(), enc.ids.end());
    lm::GenerationConfig gen;
    gen.max_new_tokens = max_new_tokens;
    gen.temperature = temperature;
    gen.greedy = greedy;
    gen.seed = seed;
    std::vector<int> out = lm::generate(model_, toks, gen);
    std::vector<int> cont(out.begin() + static_cast<long>(toks.size()), out.end());
    while (!cont.empty() &&
           (cont.back() == corpus::Vocab::kEos || cont.back() == corpus::Vocab::kPad)) {
      cont.pop_back();
    }
    corpus::TokenSeq seq;
    seq.ids = std::move(cont);
    return corpus::decode(seq, vocab_);
  }

  double nll(const std::string& text) const {
    lm::MaskedSeq seq = train::encode_pretrain(text, vocab_, model_.config.max_seq);
    return lm::nll_loss(model_, seq.tokens, seq.mask);
  }

  void save(const std::filesystem::path& path) const {
    lm::save_checkpoint(model_, "python", path);
    vocab_.save(vocab_path(path));
  }

  static LanguageModel load(const std::filesystem::path& path) {
    lm::Checkpoint ckpt = lm::load_checkpoint(path);
    corpus::Vocab vocab = corpus::Vocab::load(vocab_path(path));
    if (vocab.size() != ckpt.model.config.vocab_size) {
      throw KftError(Errc::ConfigInvalid,
                     "vocabulary size does not match the checkpoint");
    }
    return LanguageModel(std::move(ckpt.model), std::move(vocab));
  }

  int vocab_size() const { return vocab_.size(); }
  long param_count() const { return static_cast<long>(lm::param_count(model_)); }

 private:
  static std::filesystem::path vocab_path(const std::filesystem::path& ckpt) {
    std::filesystem::path p = ckpt;
    p += ".vocab.json";
    return p;
  }

  lm::ModelState model_;
  corpus::Vocab vocab_;
};

py::dict triple_to_dict(const kgraph::Triple& t) {
  py::dict d;
  d["head"] = t.head.name;
  d["relation"] = kgraph::relation_name(t.relation);
  d["tail"] = t.tail.name;
  d["strength"] = t.strength;
  return d;
}

}  // namespace

PYBIND11_MODULE(_kft, m) {
  m.doc() = "Patent-concept generation core: metrics, tokenization, knowledge "
            "triples, draft checks, and a small causal language model.";

  py::register_exception<KftError>(m, "KftError");

  // --- text metrics ------------------------------------------------------
  m.def("lcs_length", &eval::lcs_length, py::arg("a"), py::arg("b"),
        "Length of the longest common subsequence of two token lists.");
  m.def(
      "rouge_n",
      [](const eval::Tokens& cand, const eval::Tokens& ref, int n) {
        return eval::rouge_n(cand, ref, n);
      },
      py::arg("candidate"), py::arg("reference"), py::arg("n"),
      "Clipped n-gram recall against the reference (n in {1, 2}).");
  m.def(
      "rouge_l",
      [](const eval::Tokens& cand, const eval::Tokens& ref) {
        return eval::rouge_l(cand, ref);
      },
      py::arg("candidate"), py::arg("reference"),
      "LCS-based F-measure between candidate and reference tokens.");
  m.def("bleu4", &eval::bleu4, py::arg("candidate"), py::arg("reference"),
        "Smoothed 4-gram BLEU with brevity penalty.");

  // --- tokenization ------------------------------------------------------
  py::class_<corpus::Vocab>(m, "Vocab",
                            "Word-level vocabulary with byte fallback.")
      .def_static(
          "build",
          [](const std::vector<std::string>& texts, int cap) {
            return corpus::build_vocab_from_texts(texts, cap);
          },
          py::arg("texts"), py::arg("cap") = 2048)
      .def("encode",
           [](const corpus::Vocab& v, const std::string& text) {
             return corpus::encode(text, v).ids;
           })
      .def("decode",
           [](const corpus::Vocab& v, std::vector<int> ids) {
             corpus::TokenSeq seq;
             seq.ids = std::move(ids);
             return corpus::decode(seq, v);
           })
      .def("__len__", [](const corpus::Vocab& v) { return v.size(); });

  // --- knowledge graph ---------------------------------------------------
  m.def(
      "extract_triples",
      [](const std::string& text) {
        auto patterns = kgraph::default_patterns();
        auto triples = kgraph::extract_triples_from_text(text, patterns, "python");
        py::list out;
        for (const auto& t : triples) out.append(triple_to_dict(t));
        return out;
      },
      py::arg("text"),
      "Extract (head, relation, tail) triples from text via cue patterns.");
  m.def(
      "verbalize",
      [](const std::string& head, const std::string& relation,
         const std::string& tail) {
        kgraph::Triple t;
        t.head.name = head;
        t.tail.name = tail;
        t.relation = kgraph::relation_from_name(relation);
        return kgraph::verbalize(t);
      },
      py::arg("head"), py::arg("relation"), py::arg("tail"),
      "Render a knowledge triple as a natural-language sentence.");

  // --- structural draft checks ------------------------------------------
  m.def(
      "check_draft",
      [](const std::string& title, const std::string& abstract_text,
         const std::string& claims_text) {
        eval::StructuredDraft d{title, abstract_text, claims_text};
        auto v = eval::reasonability_check(d);
        return py::make_tuple(v.win, v.failed_checks);
      },
      py::arg("title"), py::arg("abstract"), py::arg("claims"),
      "Structural checklist for a patent draft; returns (win, failed_rules).");

  // --- language model ----------------------------------------------------
  py::class_<LanguageModel>(m, "LanguageModel",
                            "Small decoder-only causal language model bound to "
                            "its vocabulary.")
      .def_static("pretrain", &LanguageModel::pretrain, py::arg("texts"),
                  py::arg("d_model") = 16, py::arg("n_heads") = 2,
                  py::arg("n_layers") = 1, py::arg("d_ff") = 32,
                  py::arg("max_seq") = 64, py::arg("vocab_cap") = 256,
                  py::arg("steps") = 50, py::arg("learning_rate") = 1e-3,
                  py::arg("seed") = 42)
      .def("fine_tune", &LanguageModel::fine_tune, py::arg("pairs"),
           py::arg("steps") = 50, py::arg("learning_rate") = 1e-3,
           py::arg("seed") = 42)
      .def("generate", &LanguageModel::generate, py::arg("prompt"),
           py::arg("max_new_tokens") = 32, py::arg("temperature") = 0.7,
           py::arg("greedy") = false, py::arg("seed") = 0)
      .def("nll", &LanguageModel::nll, py::arg("text"))
      .def("save", &LanguageModel::save, py::arg("path"))
      .def_static("load", &LanguageModel::load, py::arg("path"))
      .def_property_readonly("vocab_size", &LanguageModel::vocab_size)
      .def_property_readonly("param_count", &LanguageModel::param_count);
}
