#include "anlcl/trainer.hpp"

#include <cstdio>
#include <unordered_map>

#include "anlcl/analysis.hpp"
#include "anlcl/image_io.hpp"
#include "anlcl/sampler.hpp"

namespace anlcl {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void axpy(Image& acc, const Image& g, float w) {
  if (w != 0.0f) acc.flat() += w * g.flat();
}

std::uint64_t ref_key(const PatchRef& r) {
  return (std::uint64_t(std::uint32_t(r.top)) << 32) | std::uint32_t(r.left);
}

}  // namespace

std::string loss_log_csv(const std::vector<LossLogRow>& rows) {
  std::string out = "iter,l_mse,l_sparse,l_adv,l_loc,l_layer,l_asy,eta\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iter) + ',' + fmt_double(r.l_mse) + ',' + fmt_double(r.l_sparse) + ',' +
           fmt_double(r.l_adv) + ',' + fmt_double(r.l_loc) + ',' + fmt_double(r.l_layer) + ',' +
           fmt_double(r.l_asy) + ',' + std::to_string(r.eta) + '\n';
  }
  return out;
}

std::string distance_curve_csv(const std::vector<DistanceRecord>& rows) {
  std::string out = "epoch,intra_b,intra_r,inter\n";
  for (const auto& r : rows)
    out += std::to_string(r.epoch) + ',' + fmt_double(r.intra_b) + ',' + fmt_double(r.intra_r) +
           ',' + fmt_double(r.inter) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

Models Models::make(const NetworkSpec& spec, EncoderChoice encoder, std::uint64_t seed) {
  validate(spec);
  Models m;
  m.spec = spec;
  m.encoder = encoder;
  Rng base(seed);
  Rng r0 = base.fork(0), r1 = base.fork(1), r2 = base.fork(2), r3 = base.fork(3), r4 = base.fork(4);
  m.g_b = make_generator<float>(spec, r0);
  m.g_r = make_generator<float>(spec, r1);
  m.disc = make_discriminator<float>(spec, r2);
  const int layer_in =
      encoder == EncoderChoice::discriminator ? pooled_dim_disc(spec) : pooled_dim_gen(spec);
  m.proj_layer = ProjectionHead<float>(layer_in, spec.proj_hidden, spec.embed_dim, r3);
  m.proj_loc = ProjectionHead<float>(pooled_dim_gen(spec), spec.proj_hidden, spec.embed_dim, r4);
  if (!spec.share_encoder && encoder == EncoderChoice::discriminator) {
    Rng r5 = base.fork(5);
    m.disc_cl = std::make_unique<Discriminator<float>>(make_discriminator<float>(spec, r5));
  }

  // Key copies start as exact clones of the online parameters.
  Rng dummy(0);
  m.g_b_key = make_generator<float>(spec, dummy);
  m.g_r_key = make_generator<float>(spec, dummy);
  m.disc_key = make_discriminator<float>(spec, dummy);
  m.proj_layer_key = ProjectionHead<float>(layer_in, spec.proj_hidden, spec.embed_dim, dummy);
  m.proj_loc_key = ProjectionHead<float>(pooled_dim_gen(spec), spec.proj_hidden, spec.embed_dim, dummy);
  m.sync_keys();
  return m;
}

nn::ParamSet<float> Models::gen_step_params() {
  nn::ParamSet<float> ps;
  g_b.collect(ps, "g_b");
  g_r.collect(ps, "g_r");
  proj_layer.collect(ps, "proj_layer");
  proj_loc.collect(ps, "proj_loc");
  if (disc_cl) disc_cl->collect(ps, "disc_cl");
  return ps;
}

nn::ParamSet<float> Models::disc_step_params() {
  nn::ParamSet<float> ps;
  disc.collect(ps, "disc");
  return ps;
}

nn::ParamSet<float> Models::key_source_params() {
  nn::ParamSet<float> ps;
  if (disc_cl)
    disc_cl->collect(ps, "disc_cl");
  else
    disc.collect(ps, "disc");
  g_b.collect(ps, "g_b");
  g_r.collect(ps, "g_r");
  proj_layer.collect(ps, "proj_layer");
  proj_loc.collect(ps, "proj_loc");
  return ps;
}

nn::ParamSet<float> Models::key_params() {
  nn::ParamSet<float> ps;
  disc_key.collect(ps, "key_encoder/disc");
  g_b_key.collect(ps, "key_encoder/g_b");
  g_r_key.collect(ps, "key_encoder/g_r");
  proj_layer_key.collect(ps, "key_encoder/proj_layer");
  proj_loc_key.collect(ps, "key_encoder/proj_loc");
  return ps;
}

nn::ParamSet<float> Models::all_params() {
  nn::ParamSet<float> ps;
  g_b.collect(ps, "g_b");
  g_r.collect(ps, "g_r");
  disc.collect(ps, "disc");
  if (disc_cl) disc_cl->collect(ps, "disc_cl");
  proj_layer.collect(ps, "proj_layer");
  proj_loc.collect(ps, "proj_loc");
  for (auto& p : key_params()) ps.push_back(p);
  return ps;
}

CheckpointData models_checkpoint(Models& models, long iteration, const std::string& stage,
                                 const TrainConfig& cfg) {
  return snapshot_params(models.all_params(), iteration, stage, train_config_to_json(cfg).dump());
}

std::pair<TrainConfig, Models> models_from_checkpoint(const CheckpointData& data) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(data.config_json);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::format, "checkpoint carries malformed config JSON");
  }
  TrainConfig cfg = train_config_from_json(j);
  Models models = Models::make(cfg.network, cfg.encoder, cfg.seed);
  restore_params(data, models.all_params());
  return {std::move(cfg), std::move(models)};
}

// ---------------------------------------------------------------------------
// Encoder pass plumbing
// ---------------------------------------------------------------------------

namespace {

// One tapped online forward whose tap gradients are accumulated until the
// final backward through the owning network.
struct EncoderPass {
  nn::Trace<float> trace;
  std::vector<int> tap_ids;
  std::vector<int> strides;
  std::vector<Tensor<float>> tap_grads;
  Tensor<float> output;  // logits (discriminator) or bottleneck (generator encoder)
};

struct QueryEmbed {
  MatX<float> emb;
  ProjectionHead<float>::Cache cache;
  std::vector<PatchRef> refs;
};

struct KeyMaps {
  std::vector<Tensor<float>> maps;
  std::vector<int> strides;
};

QueryEmbed embed_query(EncoderPass& pass, const ProjectionHead<float>& proj,
                       const std::vector<PatchRef>& refs) {
  QueryEmbed q;
  q.refs = refs;
  const MatX<float> pooled = pool_patch_features(pass.trace.taps, pass.strides, refs);
  q.emb = proj.forward(pooled, q.cache);
  return q;
}

void embed_query_backward(EncoderPass& pass, ProjectionHead<float>& proj, const QueryEmbed& q,
                          const MatX<float>& d_emb) {
  const MatX<float> d_pooled = proj.backward(d_emb, q.cache);
  scatter_patch_feature_grads(d_pooled, pass.trace.taps, pass.strides, q.refs, pass.tap_grads);
}

MatX<float> embed_keys(const KeyMaps& km, const ProjectionHead<float>& proj,
                       const std::vector<PatchRef>& refs) {
  ProjectionHead<float>::Cache cache;
  return proj.forward(pool_patch_features(km.maps, km.strides, refs), cache);
}

}  // namespace

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)), sampler_base_(Rng(cfg_.seed).fork(3)) {
  validate(cfg_);
  if (cfg_.train_dir.empty()) throw Error(ErrorKind::config, "data.train_dir is required");

  const int cells_1d = (cfg_.crop - cfg_.sampler.patch_size) / cfg_.sampler.stride + 1;
  const int cells = cells_1d * cells_1d;
  if (cfg_.sampler.patch_size > cfg_.crop)
    throw Error(ErrorKind::config, "sampler.patch_size exceeds train.crop");
  if (cells < std::max({cfg_.sampler.num_pos, cfg_.sampler.num_neg, cfg_.sampler.num_loc}))
    throw Error(ErrorKind::config, "sampler counts exceed the candidate grid for this crop");

  models_ = Models::make(cfg_.network, cfg_.encoder, Rng(cfg_.seed).fork(0).next());
  gen_opt_.emplace(models_.gen_step_params(), cfg_.lr);
  disc_opt_.emplace(models_.disc_step_params(), cfg_.lr);

  // Probe images for the distance diagnostics: full-size held-in rainy
  // images, center-cropped square to a multiple of 4.
  const auto files = list_images(std::filesystem::path(cfg_.train_dir) / "rainy");
  if (files.empty()) throw Error(ErrorKind::config, "no rainy images under " + cfg_.train_dir);
  for (std::size_t i = 0; i < files.size() && int(probes_.size()) < cfg_.probe_images; ++i) {
    Image img = load_image(files[i]);
    if (cfg_.downsample_factor > 1) img = downsample(img, cfg_.downsample_factor);
    const int size4 = std::min(img.height(), img.width()) / 4 * 4;
    if (size4 < 72) continue;
    probes_.push_back(
        read_patch(img, PatchRef{0, (img.height() - size4) / 2, (img.width() - size4) / 2, size4}));
  }
  steps_per_epoch_ = std::max<long>(1, (long(files.size()) + cfg_.batch_size - 1) / cfg_.batch_size);
}

void Trainer::run_pretrain() {
  if (cfg_.pretrain_iters == 0) return;
  paired_.emplace(cfg_.train_dir, cfg_.crop, cfg_.downsample_factor, Rng(cfg_.seed).fork(1).next());
  for (int i = 0; i < cfg_.pretrain_iters; ++i) {
    log_.push_back(train_step(iter_, /*finetune_stage=*/false));
    ++iter_;
  }
  paired_.reset();
}

void Trainer::run_finetune() {
  if (cfg_.finetune_iters == 0) return;
  rainy_.emplace(std::filesystem::path(cfg_.train_dir) / "rainy", cfg_.crop, cfg_.downsample_factor,
                 Rng(cfg_.seed).fork(1).next());
  clean_.emplace(std::filesystem::path(cfg_.train_dir) / "clean", cfg_.crop, cfg_.downsample_factor,
                 Rng(cfg_.seed).fork(2).next());
  models_.sync_keys();

  long epoch = 0;
  curve_.push_back(measure_distances(epoch));
  for (int i = 0; i < cfg_.finetune_iters; ++i) {
    log_.push_back(train_step(iter_, /*finetune_stage=*/true));
    ++iter_;
    if ((i + 1) % steps_per_epoch_ == 0 || i + 1 == cfg_.finetune_iters) {
      ++epoch;
      curve_.push_back(measure_distances(epoch));
    }
  }
  rainy_.reset();
  clean_.reset();
}

LossLogRow Trainer::train_step(long iter, bool finetune_stage) {
  const int bs = cfg_.batch_size;
  const auto& w = cfg_.weights;
  const auto& ccfg = cfg_.contrastive;
  const bool enc_is_disc = cfg_.encoder == EncoderChoice::discriminator;

  nn::zero_grads(models_.gen_step_params());
  nn::zero_grads(models_.disc_step_params());

  struct SampleState {
    Image o, clean, rain;  // clean/rain only in pretrain
    nn::Trace<float> trace_gb, trace_gr;
    Image b_hat, r_hat;
    LayerSamples<float> samples;
    std::vector<LocationPair> loc_pairs;
  };
  std::vector<SampleState> batch(bs);

  // Phase A: generator forwards plus pixel-space sampling; eta needs the
  // whole batch's patch stacks before any loss is evaluated.
  PatchStack<float> eta_img, eta_rain;
  for (int s = 0; s < bs; ++s) {
    SampleState& st = batch[s];
    if (finetune_stage) {
      st.o = rainy_->next();
    } else {
      PairedSample ps = paired_->next();
      st.o = std::move(ps.rainy);
      st.clean = std::move(ps.clean);
      st.rain = std::move(ps.rain);
    }
    st.b_hat = models_.g_b.seq.forward(st.o, st.trace_gb);
    st.r_hat = models_.g_r.seq.forward(st.o, st.trace_gr);
    if (finetune_stage) {
      Rng srng = sampler_base_.fork(iter).fork(s);
      st.samples = sample_layer_patches(st.b_hat, st.r_hat, cfg_.sampler, srng);
      st.loc_pairs = sample_location_pairs(st.o, st.b_hat, cfg_.sampler, srng);
      for (std::size_t i = 0; i < st.samples.pos_b.size(); ++i)
        eta_img.push(st.samples.pos_b.patches[i], st.samples.pos_b.refs[i]);
      for (std::size_t i = 0; i < st.samples.pos_r.size(); ++i)
        eta_rain.push(st.samples.pos_r.patches[i], st.samples.pos_r.refs[i]);
    }
  }
  const int eta = finetune_stage ? eta_from_entropy(eta_img, eta_rain) : 0;

  LossLogRow row;
  row.iter = iter;
  row.eta = eta;

  // Phase B: losses and generator-side gradients.
  for (int s = 0; s < bs; ++s) {
    SampleState& st = batch[s];
    Image d_bhat(st.b_hat.channels(), st.b_hat.height(), st.b_hat.width());
    Image d_rhat(st.r_hat.channels(), st.r_hat.height(), st.r_hat.width());

    {
      Image gmse_b(d_bhat.channels(), d_bhat.height(), d_bhat.width());
      Image gmse_r = gmse_b;
      row.l_mse += self_consistency<float>(st.o, st.b_hat, st.r_hat, &gmse_b, &gmse_r) / bs;
      axpy(d_bhat, gmse_b, float(w.w_mse));
      axpy(d_rhat, gmse_r, float(w.w_mse));
    }
    {
      Image gsp(d_rhat.channels(), d_rhat.height(), d_rhat.width());
      row.l_sparse += rain_sparsity<float>(st.r_hat, &gsp) / bs;
      axpy(d_rhat, gsp, float(w.w_sparse));
    }
    if (!finetune_stage) {
      // Supervised reconstruction against the synthetic ground truth pair.
      const float inv_n = 1.0f / float(st.b_hat.size());
      for (std::int64_t i = 0; i < st.b_hat.size(); ++i) {
        d_bhat.data()[i] += 2.0f * (st.b_hat.data()[i] - st.clean.data()[i]) * inv_n;
        d_rhat.data()[i] += 2.0f * (st.r_hat.data()[i] - st.rain.data()[i]) * inv_n;
      }
    }

    // Adversarial pass on the estimated clean layer; doubles as the layer
    // encoder pass when the discriminator is the (shared) encoder.
    EncoderPass pass_b;
    {
      const bool tap_here = finetune_stage && enc_is_disc && !models_.disc_cl;
      pass_b.tap_ids = tap_here ? models_.disc.taps : std::vector<int>{};
      pass_b.strides = models_.disc.tap_strides;
      pass_b.output =
          models_.disc.seq.forward(st.b_hat, pass_b.trace, tap_here ? &pass_b.tap_ids : nullptr);
    }
    Image d_logits_b(pass_b.output.channels(), pass_b.output.height(), pass_b.output.width());
    {
      const Image prob = sigmoid_map(pass_b.output);
      Image gprob(prob.channels(), prob.height(), prob.width());
      row.l_adv += generator_adv_loss<float>(prob, &gprob) / bs;
      if (w.w_adv != 0)
        for (std::int64_t i = 0; i < prob.size(); ++i)
          d_logits_b.data()[i] = float(w.w_adv / bs) * gprob.data()[i] * prob.data()[i] *
                                 (1.0f - prob.data()[i]);
    }

    if (finetune_stage) {
      // Layer-contrastive encoder passes (online queries, momentum keys).
      EncoderPass pass_cl_b, pass_cl_r, pass_loc;
      EncoderPass* layer_pass_b = nullptr;
      EncoderPass* layer_pass_r = nullptr;

      auto disc_tap_pass = [&](const Discriminator<float>& d, const Image& img, EncoderPass& p) {
        p.tap_ids = d.taps;
        p.strides = d.tap_strides;
        p.output = d.seq.forward(img, p.trace, &p.tap_ids);
      };
      auto gen_tap_pass = [&](const Generator<float>& g, const Image& img, EncoderPass& p) {
        p.tap_ids = g.enc_taps;
        p.strides = g.enc_tap_strides;
        p.output = g.seq.forward_range(img, 0, g.enc_end, p.trace, &p.tap_ids);
      };

      if (enc_is_disc) {
        if (models_.disc_cl) {
          disc_tap_pass(*models_.disc_cl, st.b_hat, pass_cl_b);
          layer_pass_b = &pass_cl_b;
        } else {
          layer_pass_b = &pass_b;  // shared with the adversarial pass
        }
        disc_tap_pass(models_.layer_encoder_disc(), st.r_hat, pass_cl_r);
        layer_pass_r = &pass_cl_r;
      } else if (cfg_.encoder == EncoderChoice::image_generator) {
        gen_tap_pass(models_.g_b, st.b_hat, pass_cl_b);
        gen_tap_pass(models_.g_b, st.r_hat, pass_cl_r);
        layer_pass_b = &pass_cl_b;
        layer_pass_r = &pass_cl_r;
      } else {
        gen_tap_pass(models_.g_b, st.b_hat, pass_cl_b);
        gen_tap_pass(models_.g_r, st.r_hat, pass_cl_r);
        layer_pass_b = &pass_cl_b;
        layer_pass_r = &pass_cl_r;
      }
      gen_tap_pass(models_.g_b, st.b_hat, pass_loc);

      // Momentum-key feature maps.
      KeyMaps key_b, key_r, key_o;
      {
        nn::Trace<float> t;
        if (enc_is_disc) {
          models_.disc_key.seq.forward(st.b_hat, t, &models_.disc_key.taps);
          key_b = {t.taps, models_.disc_key.tap_strides};
          models_.disc_key.seq.forward(st.r_hat, t, &models_.disc_key.taps);
          key_r = {t.taps, models_.disc_key.tap_strides};
        } else if (cfg_.encoder == EncoderChoice::image_generator) {
          models_.g_b_key.seq.forward_range(st.b_hat, 0, models_.g_b_key.enc_end, t,
                                            &models_.g_b_key.enc_taps);
          key_b = {t.taps, models_.g_b_key.enc_tap_strides};
          models_.g_b_key.seq.forward_range(st.r_hat, 0, models_.g_b_key.enc_end, t,
                                            &models_.g_b_key.enc_taps);
          key_r = {t.taps, models_.g_b_key.enc_tap_strides};
        } else {
          models_.g_b_key.seq.forward_range(st.b_hat, 0, models_.g_b_key.enc_end, t,
                                            &models_.g_b_key.enc_taps);
          key_b = {t.taps, models_.g_b_key.enc_tap_strides};
          models_.g_r_key.seq.forward_range(st.r_hat, 0, models_.g_r_key.enc_end, t,
                                            &models_.g_r_key.enc_taps);
          key_r = {t.taps, models_.g_r_key.enc_tap_strides};
        }
        models_.g_b_key.seq.forward_range(st.o, 0, models_.g_b_key.enc_end, t,
                                          &models_.g_b_key.enc_taps);
        key_o = {t.taps, models_.g_b_key.enc_tap_strides};
      }

      // Queries (online embeddings with gradients).
      QueryEmbed q_anchor_b = embed_query(*layer_pass_b, models_.proj_layer, {st.samples.anchor_b});
      QueryEmbed q_group_b = embed_query(*layer_pass_b, models_.proj_layer, st.samples.pos_b.refs);
      QueryEmbed q_anchor_r = embed_query(*layer_pass_r, models_.proj_layer, {st.samples.anchor_r});
      QueryEmbed q_group_r = embed_query(*layer_pass_r, models_.proj_layer, st.samples.pos_r.refs);

      // Keys (momentum embeddings, no gradients).
      const MatX<float> k_pos_b = embed_keys(key_b, models_.proj_layer_key, st.samples.pos_b.refs);
      const MatX<float> k_pos_r = embed_keys(key_r, models_.proj_layer_key, st.samples.pos_r.refs);

      LayerContrastiveGrads<float> lgr;
      row.l_layer += layer_contrastive<float>(q_anchor_b.emb, k_pos_b, q_anchor_r.emb, k_pos_r,
                                              k_pos_b, k_pos_r, ccfg, &lgr) /
                     bs;
      if (w.w_layer != 0) {
        embed_query_backward(*layer_pass_b, models_.proj_layer, q_anchor_b,
                             (float(w.w_layer) / bs) * lgr.d_fb_anchor);
        embed_query_backward(*layer_pass_r, models_.proj_layer, q_anchor_r,
                             (float(w.w_layer) / bs) * lgr.d_fr_anchor);
      }

      {
        Emb<float> d_gr = Emb<float>::Zero(q_group_r.emb.rows(), q_group_r.emb.cols());
        Emb<float> d_gb = Emb<float>::Zero(q_group_b.emb.rows(), q_group_b.emb.cols());
        row.l_asy +=
            asymmetric_contrastive<float>(q_group_r.emb, q_group_b.emb, ccfg, eta, &d_gr, &d_gb) / bs;
        if (w.w_asy != 0) {
          embed_query_backward(*layer_pass_r, models_.proj_layer, q_group_r,
                               (float(w.w_asy) / bs) * d_gr);
          embed_query_backward(*layer_pass_b, models_.proj_layer, q_group_b,
                               (float(w.w_asy) / bs) * d_gb);
        }
      }

      // Location contrast: online anchors on the estimated clean layer, keys
      // on the rainy input via the momentum generator encoder. Unique key
      // refs are embedded once and assembled per anchor.
      {
        std::vector<PatchRef> anchor_refs;
        std::vector<PatchRef> unique_refs;
        std::unordered_map<std::uint64_t, int> index;
        auto intern = [&](const PatchRef& r) {
          auto [it, inserted] = index.try_emplace(ref_key(r), int(unique_refs.size()));
          if (inserted) unique_refs.push_back(r);
          return it->second;
        };
        std::vector<int> pos_rows;
        std::vector<int> neg_rows;
        const int n_neg = int(st.loc_pairs.front().negative_refs.size());
        for (const auto& p : st.loc_pairs) {
          anchor_refs.push_back(p.pos_b);
          pos_rows.push_back(intern(p.pos_o));
          for (const auto& nr : p.negative_refs) neg_rows.push_back(intern(nr));
        }
        const MatX<float> k_unique = embed_keys(key_o, models_.proj_loc_key, unique_refs);
        MatX<float> v_o_pos(anchor_refs.size(), k_unique.cols());
        MatX<float> v_o_neg(neg_rows.size(), k_unique.cols());
        for (std::size_t i = 0; i < pos_rows.size(); ++i) v_o_pos.row(i) = k_unique.row(pos_rows[i]);
        for (std::size_t i = 0; i < neg_rows.size(); ++i) v_o_neg.row(i) = k_unique.row(neg_rows[i]);
        (void)n_neg;

        QueryEmbed q_loc = embed_query(pass_loc, models_.proj_loc, anchor_refs);
        LocationContrastiveGrads<float> locg;
        row.l_loc += location_contrastive<float>(v_o_pos, q_loc.emb, v_o_neg, ccfg, &locg) / bs;
        if (w.w_loc != 0)
          embed_query_backward(pass_loc, models_.proj_loc, q_loc,
                               (float(w.w_loc) / bs) * locg.d_v_b_anchor);
      }

      // Backward through the encoder passes into the estimated layers.
      if (enc_is_disc) {
        if (models_.disc_cl) {
          d_bhat.flat() += models_.disc.seq.backward(d_logits_b, pass_b.trace).flat();
          Image zero_out(pass_cl_b.output.channels(), pass_cl_b.output.height(),
                         pass_cl_b.output.width());
          if (!pass_cl_b.tap_grads.empty())
            d_bhat.flat() += models_.disc_cl->seq
                                 .backward(zero_out, pass_cl_b.trace, &pass_cl_b.tap_ids,
                                           &pass_cl_b.tap_grads)
                                 .flat();
          Image zero_out_r(pass_cl_r.output.channels(), pass_cl_r.output.height(),
                           pass_cl_r.output.width());
          if (!pass_cl_r.tap_grads.empty())
            d_rhat.flat() += models_.disc_cl->seq
                                 .backward(zero_out_r, pass_cl_r.trace, &pass_cl_r.tap_ids,
                                           &pass_cl_r.tap_grads)
                                 .flat();
        } else {
          d_bhat.flat() += models_.disc.seq
                               .backward(d_logits_b, pass_b.trace,
                                         pass_b.tap_ids.empty() ? nullptr : &pass_b.tap_ids,
                                         pass_b.tap_grads.empty() ? nullptr : &pass_b.tap_grads)
                               .flat();
          Image zero_out_r(pass_cl_r.output.channels(), pass_cl_r.output.height(),
                           pass_cl_r.output.width());
          d_rhat.flat() += models_.disc.seq
                               .backward(zero_out_r, pass_cl_r.trace, &pass_cl_r.tap_ids,
                                         pass_cl_r.tap_grads.empty() ? nullptr : &pass_cl_r.tap_grads)
                               .flat();
        }
      } else {
        d_bhat.flat() += models_.disc.seq.backward(d_logits_b, pass_b.trace).flat();
        Image zb(pass_cl_b.output.channels(), pass_cl_b.output.height(), pass_cl_b.output.width());
        Generator<float>& gen_b_enc = models_.g_b;
        if (!pass_cl_b.tap_grads.empty())
          d_bhat.flat() += gen_b_enc.seq
                               .backward(zb, pass_cl_b.trace, &pass_cl_b.tap_ids, &pass_cl_b.tap_grads)
                               .flat();
        Image zr(pass_cl_r.output.channels(), pass_cl_r.output.height(), pass_cl_r.output.width());
        Generator<float>& gen_r_enc =
            cfg_.encoder == EncoderChoice::image_rain_generator ? models_.g_r : models_.g_b;
        if (!pass_cl_r.tap_grads.empty())
          d_rhat.flat() += gen_r_enc.seq
                               .backward(zr, pass_cl_r.trace, &pass_cl_r.tap_ids, &pass_cl_r.tap_grads)
                               .flat();
      }

      {
        Image zloc(pass_loc.output.channels(), pass_loc.output.height(), pass_loc.output.width());
        if (!pass_loc.tap_grads.empty())
          d_bhat.flat() += models_.g_b.seq
                               .backward(zloc, pass_loc.trace, &pass_loc.tap_ids, &pass_loc.tap_grads)
                               .flat();
      }
    } else {
      // Pretrain: only the adversarial map flows back through the
      // discriminator into the estimated clean layer.
      d_bhat.flat() += models_.disc.seq.backward(d_logits_b, pass_b.trace).flat();
    }

    models_.g_b.seq.backward(d_bhat, st.trace_gb);
    models_.g_r.seq.backward(d_rhat, st.trace_gr);
  }

  gen_opt_->step(models_.gen_step_params());
  if (finetune_stage) momentum_update(models_.key_source_params(), models_.key_params(), cfg_.momentum.m);

  // Phase C: discriminator update (1:1 with the generator update).
  nn::zero_grads(models_.gen_step_params());
  nn::zero_grads(models_.disc_step_params());
  for (int s = 0; s < bs; ++s) {
    const Image real = finetune_stage ? clean_->next() : batch[s].clean;
    nn::Trace<float> t_real, t_fake;
    const Image logits_real = models_.disc.seq.forward(real, t_real);
    const Image logits_fake = models_.disc.seq.forward(batch[s].b_hat, t_fake);
    const Image p_real = sigmoid_map(logits_real);
    const Image p_fake = sigmoid_map(logits_fake);
    Image g_real(p_real.channels(), p_real.height(), p_real.width());
    Image g_fake(p_fake.channels(), p_fake.height(), p_fake.width());
    adversarial_losses<float>(p_real, p_fake, &g_real, &g_fake, nullptr);
    Image dl_real = g_real, dl_fake = g_fake;
    dl_real.flat() *= p_real.flat() * (1.0f - p_real.flat()) / float(bs);
    dl_fake.flat() *= p_fake.flat() * (1.0f - p_fake.flat()) / float(bs);
    models_.disc.seq.backward(dl_real, t_real);
    models_.disc.seq.backward(dl_fake, t_fake);
  }
  disc_opt_->step(models_.disc_step_params());
  nn::zero_grads(models_.disc_step_params());

  const double logged[] = {row.l_mse, row.l_sparse, row.l_adv, row.l_loc, row.l_layer, row.l_asy};
  for (double v : logged)
    if (!std::isfinite(v)) throw Error(ErrorKind::numeric, "non-finite loss at iteration " +
                                                               std::to_string(iter));
  nn::check_finite(models_.gen_step_params(), "generator step");
  nn::check_finite(models_.disc_step_params(), "discriminator step");
  return row;
}

DistanceRecord Trainer::measure_distances(long epoch_label) {
  DistanceRecord rec;
  rec.epoch = epoch_label;
  if (probes_.empty()) return rec;
  Rng probe_rng = Rng(cfg_.seed).fork(4);
  int counted = 0;
  for (const Image& o : probes_) {
    const Image b_hat = generator_forward(models_.g_b, o);
    const Image r_hat = generator_forward(models_.g_r, o);
    Rng srng = probe_rng.fork(counted);
    LayerSamples<float> s;
    try {
      s = sample_layer_patches(b_hat, r_hat, cfg_.sampler, srng);
    } catch (const Error&) {
      continue;  // probe smaller than the sampling grid needs
    }
    MatX<float> fb, fr;
    if (cfg_.encoder == EncoderChoice::discriminator) {
      fb = embed_patches(models_.layer_encoder_disc(), models_.proj_layer, b_hat, s.pos_b.refs);
      fr = embed_patches(models_.layer_encoder_disc(), models_.proj_layer, r_hat, s.pos_r.refs);
    } else if (cfg_.encoder == EncoderChoice::image_generator) {
      fb = embed_patches(models_.g_b, models_.proj_layer, b_hat, s.pos_b.refs);
      fr = embed_patches(models_.g_b, models_.proj_layer, r_hat, s.pos_r.refs);
    } else {
      fb = embed_patches(models_.g_b, models_.proj_layer, b_hat, s.pos_b.refs);
      fr = embed_patches(models_.g_r, models_.proj_layer, r_hat, s.pos_r.refs);
    }
    double intra_b = 0, intra_r = 0, inter = 0;
    long nb = 0, nr = 0;
    for (Eigen::Index i = 0; i < fb.rows(); ++i)
      for (Eigen::Index j = i + 1; j < fb.rows(); ++j) {
        intra_b += (fb.row(i) - fb.row(j)).norm();
        ++nb;
      }
    for (Eigen::Index i = 0; i < fr.rows(); ++i)
      for (Eigen::Index j = i + 1; j < fr.rows(); ++j) {
        intra_r += (fr.row(i) - fr.row(j)).norm();
        ++nr;
      }
    for (Eigen::Index i = 0; i < fb.rows(); ++i)
      for (Eigen::Index j = 0; j < fr.rows(); ++j) inter += (fb.row(i) - fr.row(j)).norm();
    rec.intra_b += nb ? intra_b / nb : 0;
    rec.intra_r += nr ? intra_r / nr : 0;
    rec.inter += inter / double(fb.rows() * fr.rows());
    ++counted;
  }
  if (counted) {
    rec.intra_b /= counted;
    rec.intra_r /= counted;
    rec.inter /= counted;
  }
  return rec;
}

CheckpointData Trainer::make_checkpoint(const std::string& stage) {
  return models_checkpoint(models_, iter_, stage, cfg_);
}

void Trainer::restore(const CheckpointData& data) {
  restore_params(data, models_.all_params());
  iter_ = data.iteration;
}

DerainResult derain_image(Models& models, const Image& observed) {
  if (observed.height() < 16 || observed.width() < 16)
    throw Error(ErrorKind::dimension, "image too small for the pipeline");
  int off_y = 0, off_x = 0;
  const Image padded = reflect_pad_to_multiple_centered(observed, 4, off_y, off_x);
  const Image b_full = generator_forward(models.g_b, padded);
  const Image r_full = generator_forward(models.g_r, padded);
  DerainResult out;
  out.b = Image(observed.channels(), observed.height(), observed.width());
  out.r = out.b;
  for (int c = 0; c < observed.channels(); ++c) {
    out.b.channel(c) = b_full.channel(c).block(off_y, off_x, observed.height(), observed.width());
    out.r.channel(c) = r_full.channel(c).block(off_y, off_x, observed.height(), observed.width());
  }
  out.recon = out.b;
  out.recon.flat() += out.r.flat();
  clip01_inplace(out.recon);
  return out;
}

EvalReport evaluate_on_dataset(Models& models, const std::filesystem::path& root,
                               int downsample_factor) {
  const auto rainy_files = list_images(root / "rainy");
  if (rainy_files.empty()) throw Error(ErrorKind::config, "no rainy images under " + root.string());
  EvalReport rep;
  for (const auto& rf : rainy_files) {
    const auto cf = root / "clean" / rf.filename();
    if (!std::filesystem::exists(cf)) continue;
    Image o = load_image(rf);
    Image clean = load_image(cf);
    if (downsample_factor > 1) {
      o = downsample(o, downsample_factor);
      clean = downsample(clean, downsample_factor);
    }
    const DerainResult d = derain_image(models, o);
    rep.mean_psnr_derained += psnr(d.b, clean);
    rep.mean_psnr_rainy += psnr(o, clean);
    rep.mean_ssim_derained += ssim(d.b, clean);
    rep.mean_abs_residual += double((o.flat() - d.recon.flat()).abs().mean());
    ++rep.count;
  }
  if (rep.count == 0) throw Error(ErrorKind::config, "no paired images under " + root.string());
  rep.mean_psnr_derained /= rep.count;
  rep.mean_psnr_rainy /= rep.count;
  rep.mean_ssim_derained /= rep.count;
  rep.mean_abs_residual /= rep.count;
  return rep;
}

}  // namespace anlcl
