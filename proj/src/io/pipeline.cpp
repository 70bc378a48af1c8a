// SPDX-License-Identifier: Apache-2.0
#include <edgecloud/io/pipeline.hpp>

#include <edgecloud/error.hpp>
#include <edgecloud/gate/qbc.hpp>
#include <edgecloud/seed.hpp>

namespace edgecloud::io {

namespace {

arch::LayerSpec layer(nn::LayerKind type, std::size_t k, std::size_t d, std::size_t p,
                      std::size_t o) {
  return {type, k, d, p, o};
}

nn::Dataset rows_or_all(const nn::Dataset &data, nn::Split split) {
  nn::Dataset out = data.subset(split);
  return out.empty() ? data : out;
}

} // namespace

arch::ModelSpec default_teacher_spec(const nn::Shape &input_dims, std::size_t class_count) {
  using nn::LayerKind;
  arch::ModelSpec spec;
  spec.input_dims = input_dims;
  spec.class_count = class_count;
  const auto relu = layer(LayerKind::Relu, 0, 0, 0, 0);
  if (input_dims.size() == 3) {
    spec.layers = {layer(LayerKind::Conv, 3, 1, 1, 8),  relu,
                   layer(LayerKind::Conv, 3, 1, 1, 16), relu,
                   layer(LayerKind::Pool, 2, 2, 0, 0),  layer(LayerKind::Conv, 3, 1, 1, 16),
                   relu,                                layer(LayerKind::Flatten, 0, 0, 0, 0),
                   layer(LayerKind::Dense, 0, 0, 0, class_count)};
  } else if (input_dims.size() == 1) {
    spec.layers = {layer(LayerKind::Dense, 0, 0, 0, 64), relu,
                   layer(LayerKind::Dense, 0, 0, 0, 32), relu,
                   layer(LayerKind::Dense, 0, 0, 0, class_count)};
  } else {
    fail(ErrorKind::Input, "default teacher needs rank-1 or rank-3 samples, got " +
                               nn::shape_string(input_dims));
  }
  spec.validate();
  return spec;
}

nn::Dataset evaluation_rows(const nn::Dataset &data) { return rows_or_all(data, nn::Split::Test); }

GateArtifacts train_gate_pipeline(const nn::Network &student, const nn::Dataset &data,
                                  const GateSettings &settings) {
  settings.qbc.validate();
  const auto labeled = gate::label_samples(student, rows_or_all(data, nn::Split::Train));
  const auto set = gate::build_training_set(labeled, settings.qbc, settings.seed);
  GateArtifacts out;
  out.model = gate::train_gate(set.samples, settings.kind, settings.qbc.hyper,
                               derive_seed(settings.seed, 1));
  const auto test = gate::label_samples(student, evaluation_rows(data));
  std::vector<gate::GateSample> all = test.complex;
  all.insert(all.end(), test.normal.begin(), test.normal.end());
  out.report = {settings.kind, set.m, gate::evaluate_gate(out.model, all),
                gate::serialize_gate(out.model).size()};
  return out;
}

} // namespace edgecloud::io
