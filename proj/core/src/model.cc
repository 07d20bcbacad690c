// Copyright 2026 The rateval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rateval/model.h"

#include <cmath>
#include <limits>

#include "rateval/errors.h"
#include "rateval/random.h"

namespace rateval {
namespace {

// question ++ [SEP] ++ rationale with each element's rationale position.
struct Sequence {
  TokenSeq ids;
  std::vector<int> rationale_pos;
};

Sequence Concatenate(const View& view, int vocab_size) {
  Sequence s;
  auto check = [&](TokenId t) {
    if (t < 0 || t >= vocab_size) throw DataError("token id outside vocabulary: " + std::to_string(t));
  };
  for (TokenId t : view.question) {
    check(t);
    s.ids.push_back(t);
    s.rationale_pos.push_back(-1);
  }
  if (!view.question.empty() && !view.rationale.empty()) {
    s.ids.push_back(Vocabulary::kSep);
    s.rationale_pos.push_back(-1);
  }
  for (size_t j = 0; j < view.rationale.size(); ++j) {
    check(view.rationale[j]);
    s.ids.push_back(view.rationale[j]);
    s.rationale_pos.push_back(static_cast<int>(j));
  }
  return s;
}

// Which parameter matrix and row each bag row reads from.
struct RowSource {
  int param;
  int row;
};

// Builds the bag rows for `view` from the unigram table `emb` and the optional
// bigram table `bigram` (-1 when absent).
EmbeddedInput BuildBag(const std::vector<Parameter>& params, int emb, int bigram,
                       const FamilyConfig& family, const View& view, int vocab_size,
                       std::vector<RowSource>* sources) {
  const Sequence s = Concatenate(view, vocab_size);
  const int d = family.embedding_dim;
  const size_t n_bigrams = (bigram >= 0 && s.ids.size() > 1) ? s.ids.size() - 1 : 0;
  EmbeddedInput in;
  in.rows = Matrix(static_cast<int>(s.ids.size() + n_bigrams), d);
  int r = 0;
  for (size_t t = 0; t < s.ids.size(); ++t, ++r) {
    const double* src = params[static_cast<size_t>(emb)].value.row(s.ids[t]);
    std::copy(src, src + d, in.rows.row(r));
    in.origin.push_back({s.rationale_pos[t], -1});
    if (sources) sources->push_back({emb, s.ids[t]});
  }
  for (size_t t = 0; t < n_bigrams; ++t, ++r) {
    const int b = BigramBucket(s.ids[t], s.ids[t + 1], family.bigram_buckets);
    const double* src = params[static_cast<size_t>(bigram)].value.row(b);
    std::copy(src, src + d, in.rows.row(r));
    in.origin.push_back({s.rationale_pos[t], s.rationale_pos[t + 1]});
    if (sources) sources->push_back({bigram, b});
  }
  return in;
}

std::vector<double> MeanRows(const Matrix& rows, int d) {
  std::vector<double> h(static_cast<size_t>(d), 0.0);
  if (rows.rows == 0) return h;
  for (int r = 0; r < rows.rows; ++r) {
    const double* x = rows.row(r);
    for (int k = 0; k < d; ++k) h[static_cast<size_t>(k)] += x[k];
  }
  const double inv = 1.0 / rows.rows;
  for (double& v : h) v *= inv;
  return h;
}

// y = W x for W (out x in).
std::vector<double> MatVec(const Matrix& w, const std::vector<double>& x) {
  std::vector<double> y(static_cast<size_t>(w.rows), 0.0);
  for (int i = 0; i < w.rows; ++i) {
    const double* wr = w.row(i);
    double acc = 0;
    for (int j = 0; j < w.cols; ++j) acc += wr[j] * x[static_cast<size_t>(j)];
    y[static_cast<size_t>(i)] = acc;
  }
  return y;
}

// x = W^T y.
std::vector<double> MatTVec(const Matrix& w, const std::vector<double>& y) {
  std::vector<double> x(static_cast<size_t>(w.cols), 0.0);
  for (int i = 0; i < w.rows; ++i) {
    const double* wr = w.row(i);
    const double yi = y[static_cast<size_t>(i)];
    for (int j = 0; j < w.cols; ++j) x[static_cast<size_t>(j)] += wr[j] * yi;
  }
  return x;
}

void AddOuter(Matrix& g, const std::vector<double>& a, const std::vector<double>& b) {
  for (int i = 0; i < g.rows; ++i) {
    double* gr = g.row(i);
    const double ai = a[static_cast<size_t>(i)];
    if (ai == 0) continue;
    for (int j = 0; j < g.cols; ++j) gr[j] += ai * b[static_cast<size_t>(j)];
  }
}

void ScatterMean(const std::vector<RowSource>& sources, const std::vector<double>& dh,
                 std::vector<Matrix>& grads) {
  if (sources.empty()) return;
  const double inv = 1.0 / static_cast<double>(sources.size());
  for (const RowSource& s : sources) {
    double* g = grads[static_cast<size_t>(s.param)].row(s.row);
    for (size_t k = 0; k < dh.size(); ++k) g[k] += dh[k] * inv;
  }
}

Parameter MakeParam(const std::string& name, int rows, int cols) { return {name, Matrix(rows, cols)}; }

void CheckFamily(const FamilyConfig& f) {
  if (f.embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
  if (f.ngram_order != 1 && f.ngram_order != 2) throw ConfigError("ngram_order must be 1 or 2");
  if (f.ngram_order == 2 && f.bigram_buckets < 1) throw ConfigError("bigram_buckets must be >= 1");
}

}  // namespace

std::string ArchitectureName(Architecture arch) {
  return arch == Architecture::kEmbeddingBag ? "embedding_bag_classifier" : "bi_encoder_scorer";
}

Architecture ArchitectureFromName(const std::string& name) {
  if (name == "embedding_bag_classifier") return Architecture::kEmbeddingBag;
  if (name == "bi_encoder_scorer") return Architecture::kBiEncoder;
  throw ConfigError("unknown architecture '" + name + "'");
}

std::vector<Matrix> Model::ZeroGradients() const {
  std::vector<Matrix> g;
  g.reserve(params_.size());
  for (const Parameter& p : params_) g.emplace_back(p.value.rows, p.value.cols);
  return g;
}

// ---- EmbeddingBagClassifier ----

EmbeddingBagClassifier::EmbeddingBagClassifier(const FamilyConfig& family, int vocab_size,
                                               int num_labels)
    : Model(vocab_size, num_labels), family_(family) {
  CheckFamily(family);
  if (num_labels < 2) throw ConfigError("classifier needs at least 2 labels");
  const int d = family.embedding_dim;
  params_.push_back(MakeParam("embedding", vocab_size, d));
  if (family.ngram_order == 2) params_.push_back(MakeParam("bigram", family.bigram_buckets, d));
  head_index_ = static_cast<int>(params_.size());
  params_.push_back(MakeParam("head", num_labels, d));
  params_.push_back(MakeParam("bias", 1, num_labels));
}

EmbeddedInput EmbeddingBagClassifier::Embed(const View& view) const {
  return BuildBag(params_, 0, family_.ngram_order == 2 ? 1 : -1, family_, view, vocab_size_,
                  nullptr);
}

std::vector<double> EmbeddingBagClassifier::ForwardFromEmbeddings(const EmbeddedInput& input,
                                                                  const View&) const {
  const std::vector<double> h = MeanRows(input.rows, family_.embedding_dim);
  std::vector<double> logits = MatVec(params_[static_cast<size_t>(head_index_)].value, h);
  const Matrix& b = params_[static_cast<size_t>(head_index_ + 1)].value;
  for (int l = 0; l < num_labels_; ++l) logits[static_cast<size_t>(l)] += b.at(0, l);
  return logits;
}

Matrix EmbeddingBagClassifier::LogitGradient(const EmbeddedInput& input, const View&,
                                             int target) const {
  Matrix g(input.rows.rows, input.rows.cols);
  if (input.rows.rows == 0) return g;
  const double* w = params_[static_cast<size_t>(head_index_)].value.row(target);
  const double inv = 1.0 / input.rows.rows;
  for (int r = 0; r < g.rows; ++r) {
    for (int k = 0; k < g.cols; ++k) g.at(r, k) = w[k] * inv;
  }
  return g;
}

void EmbeddingBagClassifier::Backward(const View& view, std::span<const double> dlogits,
                                      std::vector<Matrix>& grads) const {
  std::vector<RowSource> sources;
  const EmbeddedInput in = BuildBag(params_, 0, family_.ngram_order == 2 ? 1 : -1, family_, view,
                                    vocab_size_, &sources);
  const std::vector<double> h = MeanRows(in.rows, family_.embedding_dim);
  const std::vector<double> dl(dlogits.begin(), dlogits.end());
  AddOuter(grads[static_cast<size_t>(head_index_)], dl, h);
  Matrix& gb = grads[static_cast<size_t>(head_index_ + 1)];
  for (int l = 0; l < num_labels_; ++l) gb.at(0, l) += dl[static_cast<size_t>(l)];
  ScatterMean(sources, MatTVec(params_[static_cast<size_t>(head_index_)].value, dl), grads);
}

std::unique_ptr<Model> EmbeddingBagClassifier::Clone() const {
  return std::make_unique<EmbeddingBagClassifier>(*this);
}

// ---- BiEncoderScorer ----

BiEncoderScorer::BiEncoderScorer(const FamilyConfig& family, int vocab_size)
    : Model(vocab_size, 0), family_(family) {
  CheckFamily(family);
  const int d = family.embedding_dim;
  q_emb_ = 0;
  params_.push_back(MakeParam("q_embedding", vocab_size, d));
  if (family.ngram_order == 2) {
    q_bigram_ = static_cast<int>(params_.size());
    params_.push_back(MakeParam("q_bigram", family.bigram_buckets, d));
  }
  q_proj_ = static_cast<int>(params_.size());
  params_.push_back(MakeParam("q_proj", d, d));
  c_emb_ = static_cast<int>(params_.size());
  params_.push_back(MakeParam("c_embedding", vocab_size, d));
  c_proj_ = static_cast<int>(params_.size());
  params_.push_back(MakeParam("c_proj", d, d));
}

EmbeddedInput BiEncoderScorer::Embed(const View& view) const {
  if (view.choices.empty()) throw DataError("bi-encoder view has no choices");
  return BuildBag(params_, q_emb_, q_bigram_, family_, view, vocab_size_, nullptr);
}

std::vector<double> BiEncoderScorer::EncodeQuestion(const EmbeddedInput& input) const {
  return MatVec(params_[static_cast<size_t>(q_proj_)].value,
                MeanRows(input.rows, family_.embedding_dim));
}

std::vector<double> BiEncoderScorer::EncodeChoice(const TokenSeq& choice) const {
  const int d = family_.embedding_dim;
  std::vector<double> h(static_cast<size_t>(d), 0.0);
  const Matrix& e = params_[static_cast<size_t>(c_emb_)].value;
  for (TokenId t : choice) {
    if (t < 0 || t >= vocab_size_) throw DataError("token id outside vocabulary: " + std::to_string(t));
    for (int k = 0; k < d; ++k) h[static_cast<size_t>(k)] += e.at(t, k);
  }
  if (!choice.empty()) {
    for (double& v : h) v /= static_cast<double>(choice.size());
  }
  return MatVec(params_[static_cast<size_t>(c_proj_)].value, h);
}

std::vector<double> BiEncoderScorer::ForwardFromEmbeddings(const EmbeddedInput& input,
                                                           const View& view) const {
  if (view.choices.empty()) throw DataError("bi-encoder view has no choices");
  const std::vector<double> u = EncodeQuestion(input);
  std::vector<double> logits;
  logits.reserve(view.choices.size());
  for (const TokenSeq& c : view.choices) {
    const std::vector<double> v = EncodeChoice(c);
    double dot = 0;
    for (size_t k = 0; k < u.size(); ++k) dot += u[k] * v[k];
    logits.push_back(dot);
  }
  return logits;
}

Matrix BiEncoderScorer::LogitGradient(const EmbeddedInput& input, const View& view,
                                      int target) const {
  Matrix g(input.rows.rows, input.rows.cols);
  if (input.rows.rows == 0) return g;
  const std::vector<double> v = EncodeChoice(view.choices.at(static_cast<size_t>(target)));
  const std::vector<double> dh = MatTVec(params_[static_cast<size_t>(q_proj_)].value, v);
  const double inv = 1.0 / input.rows.rows;
  for (int r = 0; r < g.rows; ++r) {
    for (int k = 0; k < g.cols; ++k) g.at(r, k) = dh[static_cast<size_t>(k)] * inv;
  }
  return g;
}

void BiEncoderScorer::Backward(const View& view, std::span<const double> dlogits,
                               std::vector<Matrix>& grads) const {
  if (view.choices.empty()) throw DataError("bi-encoder view has no choices");
  const int d = family_.embedding_dim;
  std::vector<RowSource> sources;
  const EmbeddedInput in = BuildBag(params_, q_emb_, q_bigram_, family_, view, vocab_size_, &sources);
  const std::vector<double> hq = MeanRows(in.rows, d);
  const std::vector<double> u = MatVec(params_[static_cast<size_t>(q_proj_)].value, hq);
  const Matrix& ce = params_[static_cast<size_t>(c_emb_)].value;
  std::vector<double> du(static_cast<size_t>(d), 0.0);
  for (size_t k = 0; k < view.choices.size(); ++k) {
    const double dl = dlogits[k];
    if (dl == 0) continue;
    const TokenSeq& c = view.choices[k];
    std::vector<double> hc(static_cast<size_t>(d), 0.0);
    for (TokenId t : c) {
      for (int j = 0; j < d; ++j) hc[static_cast<size_t>(j)] += ce.at(t, j);
    }
    if (!c.empty()) {
      for (double& x : hc) x /= static_cast<double>(c.size());
    }
    const std::vector<double> v = MatVec(params_[static_cast<size_t>(c_proj_)].value, hc);
    for (int j = 0; j < d; ++j) du[static_cast<size_t>(j)] += dl * v[static_cast<size_t>(j)];
    std::vector<double> dv(u);
    for (double& x : dv) x *= dl;
    AddOuter(grads[static_cast<size_t>(c_proj_)], dv, hc);
    if (c.empty()) continue;
    const std::vector<double> dhc = MatTVec(params_[static_cast<size_t>(c_proj_)].value, dv);
    const double inv = 1.0 / static_cast<double>(c.size());
    for (TokenId t : c) {
      double* g = grads[static_cast<size_t>(c_emb_)].row(t);
      for (int j = 0; j < d; ++j) g[j] += dhc[static_cast<size_t>(j)] * inv;
    }
  }
  AddOuter(grads[static_cast<size_t>(q_proj_)], du, hq);
  ScatterMean(sources, MatTVec(params_[static_cast<size_t>(q_proj_)].value, du), grads);
}

std::unique_ptr<Model> BiEncoderScorer::Clone() const { return std::make_unique<BiEncoderScorer>(*this); }

// ---- free functions ----

std::unique_ptr<Model> MakeModel(const FamilyConfig& family, int vocab_size, int num_labels,
                                 uint64_t seed) {
  std::unique_ptr<Model> m;
  if (family.architecture == Architecture::kEmbeddingBag) {
    m = std::make_unique<EmbeddingBagClassifier>(family, vocab_size, num_labels);
  } else {
    m = std::make_unique<BiEncoderScorer>(family, vocab_size);
  }
  Rng rng(seed);
  const double scale = 1.0 / family.embedding_dim;
  for (Parameter& p : m->parameters()) {
    if (p.name.find("embedding") != std::string::npos || p.name.find("bigram") != std::string::npos) {
      for (double& v : p.value.data) v = rng.Uniform(-scale, scale);
    } else if (p.name.find("proj") != std::string::npos) {
      for (int i = 0; i < p.value.rows; ++i) p.value.at(i, i) = 1.0;
    }
  }
  return m;
}

int BigramBucket(TokenId a, TokenId b, int buckets) {
  char buf[8];
  for (int i = 0; i < 4; ++i) {
    buf[i] = static_cast<char>((static_cast<uint32_t>(a) >> (8 * i)) & 0xff);
    buf[4 + i] = static_cast<char>((static_cast<uint32_t>(b) >> (8 * i)) & 0xff);
  }
  return static_cast<int>(Fnv1a64(std::string_view(buf, 8)) % static_cast<uint64_t>(buckets));
}

std::vector<double> Softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0;
  for (double& v : p) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

LossAndGrad CrossEntropyGrad(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<size_t>(label) >= logits.size()) {
    throw DataError("label index outside the logit range");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (double v : logits) z += std::exp(v - m);
  const double log_z = m + std::log(z);
  LossAndGrad out;
  out.loss = log_z - logits[static_cast<size_t>(label)];
  out.grad.resize(logits.size());
  for (size_t j = 0; j < logits.size(); ++j) out.grad[j] = std::exp(logits[j] - log_z);
  out.grad[static_cast<size_t>(label)] -= 1.0;
  return out;
}

}  // namespace rateval
