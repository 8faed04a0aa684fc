// Copyright 2026 The fedpad-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <filesystem>

#include "doctest.h"
#include "fedpad/binary_io.hpp"
#include "fedpad/error.hpp"
#include "fedpad/federation.hpp"

using namespace fedpad;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.image_h = 8;
  c.image_w = 8;
  c.conv1 = 3;
  c.conv2 = 2;
  c.depth_h = 2;
  c.depth_w = 2;
  c.decoder_channels = 2;
  c.classifier_hidden = 4;
  return c;
}

FamilyRecipe tiny_recipe() {
  FamilyRecipe r;
  r.image_h = 8;
  r.image_w = 8;
  r.depth_h = 2;
  r.depth_w = 2;
  return r;
}

std::vector<DomainDataset> tiny_domains(std::size_t k, std::size_t n, std::uint64_t seed = 3) {
  return generate_family(k, n, tiny_recipe(), seed, 8).training;
}

ParameterSet vec_set(std::initializer_list<double> values) {
  ParameterSet p;
  p.add("w", Tensor({values.size()}, std::vector<double>(values)));
  return p;
}

ModelUpdate update_of(std::uint64_t dc, std::uint64_t round, ParameterSet p) {
  return ModelUpdate{dc, round, std::move(p)};
}

ParameterSet random_set(const Rng& rng) {
  Rng ra = rng.fork("a"), rb = rng.fork("b");
  ParameterSet p;
  p.add("a", draw(ra, Normal{0, 1}, {3, 2}));
  p.add("b", draw(rb, Normal{0, 5}, {4}));
  return p;
}

DataCenter make_dc(DomainDataset d, const AnyModel& model, double lr, std::size_t epochs = 1) {
  const std::uint32_t id = d.domain_id();
  return DataCenter(std::move(d), model, nn::Optimizer(nn::AdamSpec{lr}), LocalTraining{epochs, 4, {}},
                    Rng(11, 0).fork("dc", id));
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fedpad_fed_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("model updates round-trip through the wire format") {
  ParameterSet p = random_set(Rng(1, 0));
  const ModelUpdate u = update_of(7, 3, p);
  const auto bytes = u.encode();
  const ModelUpdate back = ModelUpdate::decode(bytes);
  CHECK(back == u);
  CHECK(back.entries.get("a") == p.get("a"));
}

TEST_CASE("damaged model updates are rejected") {
  const auto bytes = update_of(1, 0, random_set(Rng(2, 0))).encode();
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{20}, bytes.size() - 1}) {
    CAPTURE(cut);
    CHECK_THROWS_AS(ModelUpdate::decode(std::span(bytes).first(cut)), ParseError);
  }
  auto bad_magic = bytes;
  bad_magic[0] ^= 0xFF;
  CHECK_THROWS_AS(ModelUpdate::decode(bad_magic), ParseError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(ModelUpdate::decode(bad_version), ParseError);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x01;
  CHECK_THROWS_AS(ModelUpdate::decode(flipped), ParseError);
  auto longer = bytes;
  longer.push_back(0);
  CHECK_THROWS_AS(ModelUpdate::decode(longer), ParseError);
}

TEST_CASE("aggregate examples") {
  const ParameterSet a = aggregate({update_of(0, 0, vec_set({1, 3})), update_of(1, 0, vec_set({3, 5}))});
  CHECK(a.get("w") == Tensor({2}, {2, 4}));
  const ParameterSet b = aggregate(
      {update_of(0, 0, vec_set({0})), update_of(1, 0, vec_set({0})), update_of(2, 0, vec_set({3}))});
  CHECK(b.get("w") == Tensor({1}, {1}));
}

TEST_CASE("aggregate of identical inputs is the input bit for bit") {
  for (std::size_t k = 1; k <= 7; ++k) {
    const ParameterSet p = random_set(Rng(30 + k, 0));
    std::vector<ModelUpdate> ups;
    for (std::size_t i = 0; i < k; ++i) ups.push_back(update_of(i, 0, p));
    CHECK(aggregate(ups) == p);
  }
}

TEST_CASE("aggregate ignores the order of updates") {
  Rng rng(41, 0);
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    std::vector<ModelUpdate> ups;
    for (std::size_t i = 0; i < k; ++i) ups.push_back(update_of(i, 0, random_set(rng.fork("set", i))));
    const ParameterSet base = aggregate(ups);
    Rng shuffle = rng.fork("perm", trial);
    const auto perm = shuffle.permutation(k);
    std::vector<ModelUpdate> permuted;
    for (auto i : perm) permuted.push_back(ups[i]);
    CHECK(aggregate(permuted) == base);
    rng = rng.fork("next");
  }
}

TEST_CASE("aggregate is linear and matches the plain mean") {
  Rng rng(42, 0);
  const std::size_t k = 5;
  std::vector<ParameterSet> x, y;
  std::vector<ModelUpdate> ux, uy, mix;
  const double alpha = 0.7, beta = -1.3;
  for (std::size_t i = 0; i < k; ++i) {
    x.push_back(random_set(rng.fork("x", i)));
    y.push_back(random_set(rng.fork("y", i)));
    ParameterSet m = x.back().zeros_like();
    for (std::size_t e = 0; e < m.size(); ++e) {
      for (std::size_t j = 0; j < m.entries()[e].value.size(); ++j) {
        m.entries()[e].value[j] =
            alpha * x.back().entries()[e].value[j] + beta * y.back().entries()[e].value[j];
      }
    }
    ux.push_back(update_of(i, 0, x.back()));
    uy.push_back(update_of(i, 0, y.back()));
    mix.push_back(update_of(i, 0, m));
  }
  const ParameterSet ax = aggregate(ux), ay = aggregate(uy), am = aggregate(mix);
  for (std::size_t e = 0; e < am.size(); ++e) {
    for (std::size_t j = 0; j < am.entries()[e].value.size(); ++j) {
      const double lin = alpha * ax.entries()[e].value[j] + beta * ay.entries()[e].value[j];
      CHECK(am.entries()[e].value[j] == doctest::Approx(lin).epsilon(1e-12));
      double mean = 0.0;
      for (const auto& p : x) mean += p.entries()[e].value[j];
      CHECK(ax.entries()[e].value[j] == doctest::Approx(mean / k).epsilon(1e-12));
    }
  }
}

TEST_CASE("aggregate rejects empty and mismatched rounds") {
  CHECK_THROWS_AS(aggregate({}), ProtocolError);
  CHECK_THROWS_AS(aggregate({update_of(0, 0, vec_set({1})), update_of(1, 1, vec_set({1}))}),
                  VersionError);
  CHECK_THROWS_AS(aggregate({update_of(0, 0, vec_set({1})), update_of(1, 0, vec_set({1, 2}))}),
                  VersionError);
  ParameterSet other;
  other.add("v", Tensor({1}));
  CHECK_THROWS_AS(aggregate({update_of(0, 0, vec_set({1})), update_of(1, 0, other)}), VersionError);
}

TEST_CASE("zero epochs or zero learning rate return the global model") {
  const ModelConfig cfg = tiny();
  const AnyModel model = build_monolithic(cfg, Rng(5, 0));
  const ParameterSet global = model_params(AnyModel(build_monolithic(cfg, Rng(6, 0))));
  auto ds = tiny_domains(1, 8);
  DataCenter no_epochs = make_dc(ds[0], model, 1e-3, 0);
  CHECK(no_epochs.update_full(global, 0).entries == global);
  DataCenter no_lr(ds[0], model, nn::Optimizer(nn::SgdSpec{0.0}), LocalTraining{2, 4, {}}, Rng(1, 0));
  CHECK(no_lr.update_full(global, 0).entries == global);
  DataCenter trains = make_dc(ds[0], model, 1e-2);
  CHECK_FALSE(trains.update_full(global, 0).entries == global);
}

TEST_CASE("an empty dataset is a protocol error") {
  const ModelConfig cfg = tiny();
  const AnyModel model = build_disentangled(cfg, Rng(5, 0));
  DataCenter dc(DomainDataset(4, {}), model, nn::Optimizer(nn::AdamSpec{}), LocalTraining{}, Rng(1, 0));
  CHECK_THROWS_AS(dc.update_full(model_params(model), 0), ProtocolError);
  CHECK_THROWS_AS(dc.update_invariant(model_params(model).subset(Partition::kInvariant), 0),
                  ProtocolError);
}

TEST_CASE("invariant updates carry exactly the invariant partition") {
  const ModelConfig cfg = tiny();
  const DisentangledModel m = build_disentangled(cfg, Rng(8, 0));
  const ParameterSet inv = m.params().subset(Partition::kInvariant);
  auto ds = tiny_domains(1, 8);
  DataCenter dc = make_dc(ds[0], AnyModel(m), 1e-2);
  const ModelUpdate u = dc.update_invariant(inv, 0);
  CHECK(u.entries.names() == inv.names());
  for (const auto& name : u.entries.names()) {
    const bool shared = name.starts_with(kInvariantExtractor) || name.starts_with(kClassifier) ||
                        name.starts_with(kDepthEstimator);
    CHECK(shared);
  }
  // The wire drops partition tags, so every uploaded entry decodes as invariant.
  const auto decoded = ModelUpdate::decode(u.encode());
  CHECK(decoded.entries.subset(Partition::kSpecific).empty());
}

TEST_CASE("downloads with specific entries are partition errors") {
  const ModelConfig cfg = tiny();
  const DisentangledModel m = build_disentangled(cfg, Rng(8, 0));
  auto ds = tiny_domains(1, 8);
  DataCenter dc = make_dc(ds[0], AnyModel(m), 1e-2);
  CHECK_THROWS_AS(dc.update_invariant(m.params(), 0), PartitionError);
  CHECK_THROWS_AS(dc.update_invariant(m.params().with_prefixes({kInvariantExtractor}), 0),
                  VersionError);
  DataCenter mono = make_dc(ds[0], AnyModel(build_monolithic(cfg, Rng(8, 0))), 1e-2);
  CHECK_THROWS_AS(mono.update_invariant(m.params().subset(Partition::kInvariant), 0), ProtocolError);
}

TEST_CASE("server stores only shared entries in invariant mode") {
  const DisentangledModel m = build_disentangled(tiny(), Rng(9, 0));
  Server inv(m.params(), AggregationMode::kInvariantOnly);
  CHECK(inv.global() == m.params().subset(Partition::kInvariant));
  Server full(m.params(), AggregationMode::kFull);
  CHECK(full.global().size() == m.params().size());

  CHECK_THROWS_AS(inv.apply({update_of(0, 0, m.params())}), PartitionError);
  CHECK_THROWS_AS(inv.apply({update_of(0, 1, inv.global())}), VersionError);
  CHECK_THROWS_AS(inv.apply({}), ProtocolError);
  inv.apply({update_of(0, 0, inv.global())});
  CHECK(inv.round() == 1);
}

TEST_CASE("users download the extractor and classifier only") {
  const DisentangledModel m = build_disentangled(tiny(), Rng(9, 0));
  const ParameterSet shared = m.params().subset(Partition::kInvariant);
  const ParameterSet art = user_artifact(shared, AggregationMode::kInvariantOnly);
  CHECK(art == m.user_params());
  for (const auto& n : art.names()) {
    CHECK((n.starts_with(kInvariantExtractor) || n.starts_with(kClassifier)));
  }
  CHECK(user_artifact(m.params(), AggregationMode::kFull) == m.params());
}

TEST_CASE("specific parameters stay local and diverge across data centers") {
  const ModelConfig cfg = tiny();
  const DisentangledModel m = build_disentangled(cfg, Rng(10, 0));
  auto domains = tiny_domains(2, 8);
  std::vector<DataCenter> dcs;
  for (auto& d : domains) dcs.push_back(make_dc(d, AnyModel(m), 1e-2));
  Server server(m.params(), AggregationMode::kInvariantOnly);
  const FederationResult res = run_rounds(server, dcs, 2);
  const auto& p0 = model_params(dcs[0].model());
  const auto& p1 = model_params(dcs[1].model());
  const ParameterSet s0 = p0.subset(Partition::kSpecific), s1 = p1.subset(Partition::kSpecific);
  CHECK(max_abs_diff(s0, s1) > 0.0);
  CHECK(max_abs_diff(s0, m.params().subset(Partition::kSpecific)) > 0.0);
  CHECK(res.global.names() == m.params().subset(Partition::kInvariant).names());
}

TEST_CASE("zero learning rate is a fixed point of the protocol") {
  const ModelConfig cfg = tiny();
  for (bool gen : {false, true}) {
    const AnyModel model = gen ? AnyModel(build_disentangled(cfg, Rng(12, 0)))
                               : AnyModel(build_monolithic(cfg, Rng(12, 0)));
    const AggregationMode mode = gen ? AggregationMode::kInvariantOnly : AggregationMode::kFull;
    auto domains = tiny_domains(3, 8);
    std::vector<DataCenter> dcs;
    for (auto& d : domains) {
      dcs.emplace_back(d, model, nn::Optimizer(nn::SgdSpec{0.0}), LocalTraining{1, 4, {}}, Rng(1, 0));
    }
    Server server(model_params(model), mode);
    const ParameterSet start = server.global();
    const auto res = run_rounds(server, dcs, 3);
    CHECK(res.global == start);
    CHECK(res.rounds.size() == 3);
    CHECK(server.round() == 3);
  }
}

TEST_CASE("concurrent rounds equal sequential rounds") {
  const ModelConfig cfg = tiny();
  for (bool gen : {false, true}) {
    const AnyModel model = gen ? AnyModel(build_disentangled(cfg, Rng(13, 0)))
                               : AnyModel(build_monolithic(cfg, Rng(13, 0)));
    const AggregationMode mode = gen ? AggregationMode::kInvariantOnly : AggregationMode::kFull;
    auto run = [&](bool concurrent) {
      auto domains = tiny_domains(3, 12);
      std::vector<DataCenter> dcs;
      for (auto& d : domains) dcs.push_back(make_dc(d, model, 1e-2));
      Server server(model_params(model), mode);
      return run_rounds(server, dcs, 3, FederationOptions{concurrent, std::nullopt});
    };
    const auto seq = run(false), par = run(true);
    CHECK(seq.global == par.global);
    for (std::size_t t = 0; t < seq.rounds.size(); ++t) {
      CHECK(seq.rounds[t].aggregate_checksum == par.rounds[t].aggregate_checksum);
      CHECK(seq.rounds[t].upload_bytes == par.rounds[t].upload_bytes);
    }
  }
}

TEST_CASE("one data center with full averaging equals centralized training") {
  const ModelConfig cfg = tiny();
  const AnyModel model = build_monolithic(cfg, Rng(14, 0));
  auto domains = tiny_domains(1, 12);
  const std::size_t rounds = 4;
  // Full-batch SGD: each round is one gradient step on the whole domain.
  auto sgd = [&] {
    return DataCenter(domains[0], model, nn::Optimizer(nn::SgdSpec{0.05}), LocalTraining{1, 12, {}},
                      Rng(2, 0));
  };
  std::vector<DataCenter> dcs{sgd()};
  Server server(model_params(model), AggregationMode::kFull);
  const auto fed = run_rounds(server, dcs, rounds);
  DataCenter central = sgd();
  for (std::size_t t = 0; t < rounds; ++t) central.train_local(t);
  CHECK(max_abs_diff(fed.global, model_params(central.model())) <= 1e-9);
  CHECK(max_abs_diff(fed.global, model_params(model)) > 0.0);
}

TEST_CASE("data centers only read their own domain") {
  const ModelConfig cfg = tiny();
  const AnyModel model = build_disentangled(cfg, Rng(15, 0));
  auto domains = tiny_domains(3, 8);
  auto log = std::make_shared<AccessLog>();
  std::vector<DataCenter> dcs;
  for (auto& d : domains) {
    d.attach_audit(log);
    dcs.push_back(make_dc(d, model, 1e-2));
  }
  Server server(model_params(model), AggregationMode::kInvariantOnly);
  run_rounds(server, dcs, 2, FederationOptions{true, std::nullopt});
  const auto snap = log->snapshot();
  CHECK(snap.size() == 3);
  for (const auto& [reader, reads] : snap) {
    REQUIRE(reads.size() == 1);
    CHECK(reader == "dc:" + std::to_string(reads.begin()->first));
    CHECK(reads.begin()->second == 2 * 8);
  }
}

TEST_CASE("a failing data center aborts the round") {
  const ModelConfig cfg = tiny();
  const AnyModel model = build_monolithic(cfg, Rng(16, 0));
  auto domains = tiny_domains(2, 8);
  std::vector<DataCenter> dcs;
  dcs.push_back(make_dc(domains[0], model, 1e-2));
  dcs.emplace_back(DomainDataset(9, {}), model, nn::Optimizer(nn::AdamSpec{}), LocalTraining{}, Rng(1, 0));
  Server server(model_params(model), AggregationMode::kFull);
  const ParameterSet before = server.global();
  CHECK_THROWS_AS(run_rounds(server, dcs, 1), ProtocolError);
  CHECK(server.global() == before);
  CHECK(server.round() == 0);
}

TEST_CASE("checkpoints round-trip and are written every round") {
  const ModelConfig cfg = tiny();
  const AnyModel model = build_disentangled(cfg, Rng(17, 0));
  const auto dir = scratch("ckpt");
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "one.bin", model_params(model), 5);
  const ModelUpdate back = load_checkpoint(dir / "one.bin");
  CHECK(back.round == 5);
  CHECK(back.data_center == ModelUpdate::kServerId);
  CHECK(back.entries.names() == model_params(model).names());
  CHECK(max_abs_diff(back.entries, model_params(model)) == 0.0);

  auto domains = tiny_domains(2, 8);
  std::vector<DataCenter> dcs;
  for (auto& d : domains) dcs.push_back(make_dc(d, model, 1e-2));
  Server server(model_params(model), AggregationMode::kInvariantOnly);
  const auto res = run_rounds(server, dcs, 2, FederationOptions{false, dir / "rounds"});
  CHECK(std::filesystem::exists(dir / "rounds" / "round_0.bin"));
  const ModelUpdate last = load_checkpoint(dir / "rounds" / "round_1.bin");
  CHECK(max_abs_diff(last.entries, res.global) == 0.0);
  CHECK(io::checksum(last.encode()) == res.rounds[1].aggregate_checksum);
  std::filesystem::remove_all(dir);
}
