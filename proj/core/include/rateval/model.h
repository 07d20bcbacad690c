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

#ifndef RATEVAL_MODEL_H_
#define RATEVAL_MODEL_H_

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rateval/tokenizer.h"

namespace rateval {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  void Zero() { std::fill(data.begin(), data.end(), 0.0); }
};

struct Parameter {
  std::string name;
  Matrix value;
};

enum class Architecture { kEmbeddingBag, kBiEncoder };

std::string ArchitectureName(Architecture arch);
Architecture ArchitectureFromName(const std::string& name);

// Shape of one member of the predictive family. Training budget lives in
// TrainConfig.
struct FamilyConfig {
  Architecture architecture = Architecture::kEmbeddingBag;
  int embedding_dim = 16;
  // 1 = unigrams, 2 = unigrams + hashed bigrams (question side only for the
  // bi-encoder).
  int ngram_order = 2;
  int bigram_buckets = 4096;
};

// One input to a predictor. An empty sequence is the null input.
struct View {
  TokenSeq question;
  TokenSeq rationale;
  // Open-label mode only.
  std::vector<TokenSeq> choices;
};

// Rationale positions a bag row is derived from (-1 when not from the
// rationale). Bigram rows may derive from two positions.
struct RowOrigin {
  int first = -1;
  int second = -1;
  bool from_rationale() const { return first >= 0 || second >= 0; }
};

// The question-side bag: one row per unigram (and bigram) of
// question ++ [SEP] ++ rationale. SEP appears only when both are non-null.
struct EmbeddedInput {
  Matrix rows;
  std::vector<RowOrigin> origin;
};

// A differentiable member of the predictive family. Parameters are named
// matrices so optimizers and checkpoints treat every architecture alike.
class Model {
 public:
  virtual ~Model() = default;

  virtual Architecture architecture() const = 0;
  virtual const FamilyConfig& family() const = 0;
  // Number of logits for `view`: label count, or choice count in open mode.
  virtual int NumOutputs(const View& view) const = 0;

  // Throws DataError for tokens outside the vocabulary or an open-label view
  // without choices.
  virtual EmbeddedInput Embed(const View& view) const = 0;
  virtual std::vector<double> ForwardFromEmbeddings(const EmbeddedInput& input,
                                                    const View& view) const = 0;
  // d logits[target] / d input.rows.
  virtual Matrix LogitGradient(const EmbeddedInput& input, const View& view,
                               int target) const = 0;
  // Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
  virtual void Backward(const View& view, std::span<const double> dlogits,
                        std::vector<Matrix>& grads) const = 0;

  std::vector<double> Forward(const View& view) const {
    return ForwardFromEmbeddings(Embed(view), view);
  }

  virtual std::unique_ptr<Model> Clone() const = 0;

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::vector<Matrix> ZeroGradients() const;
  int vocab_size() const { return vocab_size_; }
  int num_labels() const { return num_labels_; }

 protected:
  Model(int vocab_size, int num_labels) : vocab_size_(vocab_size), num_labels_(num_labels) {}

  int vocab_size_;
  int num_labels_;
  std::vector<Parameter> params_;
};

// Token embeddings mean-pooled into a linear head. Serves as the small
// attribution model, the evaluator, the baseline and the simulators.
class EmbeddingBagClassifier final : public Model {
 public:
  EmbeddingBagClassifier(const FamilyConfig& family, int vocab_size, int num_labels);

  Architecture architecture() const override { return Architecture::kEmbeddingBag; }
  const FamilyConfig& family() const override { return family_; }
  int NumOutputs(const View&) const override { return num_labels_; }
  EmbeddedInput Embed(const View& view) const override;
  std::vector<double> ForwardFromEmbeddings(const EmbeddedInput& input,
                                            const View& view) const override;
  Matrix LogitGradient(const EmbeddedInput& input, const View& view,
                       int target) const override;
  void Backward(const View& view, std::span<const double> dlogits,
                std::vector<Matrix>& grads) const override;
  std::unique_ptr<Model> Clone() const override;

  Matrix& embeddings() { return params_[0].value; }
  Matrix& head() { return params_[head_index_].value; }
  Matrix& bias() { return params_[head_index_ + 1].value; }

 private:
  FamilyConfig family_;
  int head_index_;
};

// Separate question and choice encoders (embedding + mean pool + linear
// projection); a choice's logit is the dot product of the two encodings.
class BiEncoderScorer final : public Model {
 public:
  BiEncoderScorer(const FamilyConfig& family, int vocab_size);

  Architecture architecture() const override { return Architecture::kBiEncoder; }
  const FamilyConfig& family() const override { return family_; }
  int NumOutputs(const View& view) const override {
    return static_cast<int>(view.choices.size());
  }
  EmbeddedInput Embed(const View& view) const override;
  std::vector<double> ForwardFromEmbeddings(const EmbeddedInput& input,
                                            const View& view) const override;
  Matrix LogitGradient(const EmbeddedInput& input, const View& view,
                       int target) const override;
  void Backward(const View& view, std::span<const double> dlogits,
                std::vector<Matrix>& grads) const override;
  std::unique_ptr<Model> Clone() const override;

 private:
  std::vector<double> EncodeQuestion(const EmbeddedInput& input) const;
  std::vector<double> EncodeChoice(const TokenSeq& choice) const;

  FamilyConfig family_;
  int q_emb_ = 0, q_bigram_ = -1, q_proj_ = 0, c_emb_ = 0, c_proj_ = 0;
};

// All-zero parameters except projections (identity) and embeddings, drawn
// uniform in [-1/d, 1/d] from `seed`. Heads start at zero.
std::unique_ptr<Model> MakeModel(const FamilyConfig& family, int vocab_size,
                                 int num_labels, uint64_t seed);

// Bucket for the ordered pair (a, b).
int BigramBucket(TokenId a, TokenId b, int buckets);

std::vector<double> Softmax(std::span<const double> logits);

struct LossAndGrad {
  double loss = 0;
  std::vector<double> grad;
};

// loss = -ln softmax(z)_y, grad = softmax(z) - onehot(y).
LossAndGrad CrossEntropyGrad(std::span<const double> logits, int label);

}  // namespace rateval

#endif  // RATEVAL_MODEL_H_
