#include "semlink/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "semlink/detect.hpp"
#include "semlink/embeddings.hpp"
#include "semlink/error.hpp"
#include "semlink/gradcheck.hpp"
#include "semlink/kb.hpp"
#include "semlink/models.hpp"
#include "semlink/pipeline.hpp"
#include "semlink/tensor_net.hpp"

namespace semlink {

namespace {

using ojson = nlohmann::ordered_json;

struct DataFlags {
  std::string features;
  std::string glove;
  std::string labels;
  std::size_t dim = kDefaultEmbeddingDim;
};

struct TrainFlags {
  std::size_t epochs = 200;
  double lr = 0.01;
  double val_split = 0.2;
  std::size_t batch = 32;
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
  cmd->add_option("--features", f.features, "features.jsonl")->required();
  cmd->add_option("--glove", f.glove, "word-vector text file")->required();
  cmd->add_option("--labels", f.labels, "class labels, one per line (default: built-in 12 classes)");
  cmd->add_option("--dim", f.dim, "word-vector dimension")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--epochs", f.epochs)->capture_default_str();
  cmd->add_option("--lr", f.lr)->capture_default_str();
  cmd->add_option("--val-split", f.val_split)->capture_default_str();
  cmd->add_option("--batch", f.batch)->capture_default_str();
}

LabelVocabulary load_vocabulary(const std::string& path) {
  return path.empty() ? LabelVocabulary::defaults() : LabelVocabulary::load(path);
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kFileMissing, "cannot write " + path);
  out << contents;
}

std::string sibling(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

struct LoadedData {
  Dataset dataset;
  WordVectorTable table;
  std::vector<Sample> samples;
};

LoadedData load_data(const DataFlags& f, bool include_image, std::ostream& err) {
  LabelVocabulary vocab = load_vocabulary(f.labels);
  LoadedData d{read_features(f.features, vocab), WordVectorTable::load(f.glove, f.dim), {}};
  std::vector<std::string> warnings;
  d.samples = to_samples(d.dataset, d.table, include_image, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  return d;
}

ModelBuilder builder_for(const std::string& model, std::size_t dim) {
  if (model == "baseline") return [dim](std::uint64_t s) -> std::unique_ptr<Classifier> { return build_baseline(s, dim); };
  FusionConfig fc;
  fc.embedding_dim = dim;
  return [fc](std::uint64_t s) -> std::unique_ptr<Classifier> { return build_fusion(s, fc); };
}

TrainConfig train_config(const TrainFlags& f, std::uint64_t seed) {
  return TrainConfig{f.epochs, f.lr, f.val_split, f.batch, seed};
}

EntityVectors entity_vectors_for(const KnowledgeBase& kb, const WordVectorTable& table) {
  EntityVectors out;
  for (const std::string& e : kb.entities()) out.emplace(e, embed_entity(table, e).vector);
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-graph and image-feature relation learning toolkit", "semlink"};
  app.require_subcommand(1);

  // ingest-check
  std::string ic_features, ic_labels, ic_detections, ic_kb, ic_glove;
  std::size_t ic_dim = kDefaultEmbeddingDim;
  auto* ingest = app.add_subcommand("ingest-check", "Validate input files and print their sizes");
  ingest->add_option("--features", ic_features);
  ingest->add_option("--labels", ic_labels);
  ingest->add_option("--detections", ic_detections);
  ingest->add_option("--kb", ic_kb);
  ingest->add_option("--glove", ic_glove);
  ingest->add_option("--dim", ic_dim)->capture_default_str();

  // train
  std::string tr_model = "baseline", tr_out, tr_report, tr_curves;
  std::uint64_t tr_seed = 0;
  DataFlags tr_data;
  TrainFlags tr_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a baseline or fusion classifier");
  train_cmd->add_option("--model", tr_model)->check(CLI::IsMember({"baseline", "fusion"}))->capture_default_str();
  add_data_flags(train_cmd, tr_data);
  add_train_flags(train_cmd, tr_flags);
  train_cmd->add_option("--seed", tr_seed)->required();
  train_cmd->add_option("--out", tr_out, "checkpoint path")->required();
  train_cmd->add_option("--report", tr_report, "report JSON (default: <out>.report.json)");
  train_cmd->add_option("--curves", tr_curves, "curves CSV (default: <out>.curves.csv)");

  // eval / predict
  std::string ev_ckpt;
  DataFlags ev_data;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy of a checkpoint on a feature file");
  eval_cmd->add_option("--checkpoint", ev_ckpt)->required();
  add_data_flags(eval_cmd, ev_data);

  std::string pr_ckpt, pr_out;
  DataFlags pr_data;
  auto* predict_cmd = app.add_subcommand("predict", "Per-image class predictions");
  predict_cmd->add_option("--checkpoint", pr_ckpt)->required();
  add_data_flags(predict_cmd, pr_data);
  predict_cmd->add_option("--out", pr_out, "predictions JSONL (default: stdout)");

  // cv
  std::string cv_model = "baseline", cv_out;
  std::uint64_t cv_seed = 0;
  std::size_t cv_folds = 10;
  DataFlags cv_data;
  TrainFlags cv_flags;
  auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation");
  cv_cmd->add_option("--model", cv_model)->check(CLI::IsMember({"baseline", "fusion"}))->capture_default_str();
  add_data_flags(cv_cmd, cv_data);
  add_train_flags(cv_cmd, cv_flags);
  cv_cmd->add_option("--folds", cv_folds)->capture_default_str();
  cv_cmd->add_option("--seed", cv_seed)->required();
  cv_cmd->add_option("--out", cv_out, "report JSON (default: stdout)");

  // nms
  std::string nms_in, nms_out, nms_entities;
  double nms_iou = kDefaultIouThreshold;
  std::size_t nms_keep = kDefaultMaxKeep;
  auto* nms_cmd = app.add_subcommand("nms", "Non-max suppression over raw detections");
  nms_cmd->add_option("--detections", nms_in)->required();
  nms_cmd->add_option("--iou", nms_iou)->capture_default_str();
  nms_cmd->add_option("--max-keep", nms_keep)->capture_default_str();
  nms_cmd->add_option("--out", nms_out)->required();
  nms_cmd->add_option("--entities-out", nms_entities, "per-image entity labels JSONL");

  // score-triple / rank-tails
  std::string st_kb, st_model, st_head, st_rel, st_tail;
  auto* score_cmd = app.add_subcommand("score-triple", "Raw score and plausibility of one triple");
  score_cmd->add_option("--kb", st_kb);
  score_cmd->add_option("--model", st_model)->required();
  score_cmd->add_option("--head", st_head)->required();
  score_cmd->add_option("--rel", st_rel)->required();
  score_cmd->add_option("--tail", st_tail)->required();

  std::string rt_model, rt_head, rt_rel;
  std::size_t rt_top = 0;
  auto* rank_cmd = app.add_subcommand("rank-tails", "Rank candidate tails for (head, relation)");
  rank_cmd->add_option("--model", rt_model)->required();
  rank_cmd->add_option("--head", rt_head)->required();
  rank_cmd->add_option("--rel", rt_rel)->required();
  rank_cmd->add_option("--top", rt_top, "0 lists every entity")->capture_default_str();

  // train-ntl
  std::string tn_kb, tn_glove, tn_out, tn_report;
  std::size_t tn_dim = kDefaultEmbeddingDim;
  NtlTrainConfig tn_cfg;
  auto* tn_cmd = app.add_subcommand("train-ntl", "Train the tensor-layer triple scorer");
  tn_cmd->add_option("--kb", tn_kb)->required();
  tn_cmd->add_option("--glove", tn_glove)->required();
  tn_cmd->add_option("--dim", tn_dim)->capture_default_str();
  tn_cmd->add_option("--k", tn_cfg.k)->capture_default_str();
  tn_cmd->add_option("--margin", tn_cfg.margin)->capture_default_str();
  tn_cmd->add_option("--lr", tn_cfg.lr)->capture_default_str();
  tn_cmd->add_option("--epochs", tn_cfg.epochs)->capture_default_str();
  tn_cmd->add_option("--negatives", tn_cfg.negatives_per_positive)->capture_default_str();
  tn_cmd->add_option("--seed", tn_cfg.seed)->required();
  tn_cmd->add_option("--out", tn_out)->required();
  tn_cmd->add_option("--report", tn_report, "loss report JSON (default: <out>.report.json)");

  // grad-check
  std::string gc_model = "baseline";
  std::size_t gc_draws = 100, gc_coords = 8;
  std::uint64_t gc_seed = 0;
  double gc_tol = 1e-4;
  auto* gc_cmd = app.add_subcommand("grad-check", "Analytic vs finite-difference gradients");
  gc_cmd->add_option("--model", gc_model)->check(CLI::IsMember({"baseline", "fusion", "ntl"}))->capture_default_str();
  gc_cmd->add_option("--draws", gc_draws)->capture_default_str();
  gc_cmd->add_option("--coords", gc_coords, "coordinates per parameter tensor, 0 = all")->capture_default_str();
  gc_cmd->add_option("--seed", gc_seed)->required();
  gc_cmd->add_option("--tol", gc_tol)->capture_default_str();

  std::vector<const char*> argv;
  argv.push_back("semlink");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (ingest->parsed()) {
      ojson summary;
      if (!ic_labels.empty() || !ic_features.empty()) {
        LabelVocabulary vocab = load_vocabulary(ic_labels);
        summary["labels"] = vocab.size();
        if (!ic_features.empty()) summary["features"] = read_features(ic_features, vocab).records.size();
      }
      if (!ic_detections.empty()) {
        const auto dets = read_detections(ic_detections);
        std::size_t boxes = 0;
        for (const auto& d : dets) boxes += d.boxes.size();
        summary["detections"] = {{"images", dets.size()}, {"boxes", boxes}};
      }
      if (!ic_kb.empty()) {
        const auto kb = KnowledgeBase::load(ic_kb);
        summary["kb"] = {{"entities", kb.entities().size()},
                         {"relations", kb.relations().size()},
                         {"triples", kb.triples().size()}};
      }
      if (!ic_glove.empty()) summary["glove"] = WordVectorTable::load(ic_glove, ic_dim).size();
      out << summary.dump() << '\n';
      return 0;
    }

    if (train_cmd->parsed()) {
      const bool fusion = tr_model == "fusion";
      LoadedData d = load_data(tr_data, fusion, err);
      auto model = builder_for(tr_model, tr_data.dim)(tr_seed);
      const TrainReport report = train(*model, d.samples, train_config(tr_flags, tr_seed));
      save_classifier(*model, d.dataset.vocabulary.labels(), tr_out);
      write_file(tr_report.empty() ? sibling(tr_out, ".report.json") : tr_report, report.to_json().dump(1) + "\n");
      write_file(tr_curves.empty() ? sibling(tr_out, ".curves.csv") : tr_curves, report.curves_csv());
      out << ojson{{"model", tr_model}, {"final_val_accuracy", report.final_val_accuracy}}.dump() << '\n';
      return 0;
    }

    if (eval_cmd->parsed() || predict_cmd->parsed()) {
      const bool is_eval = eval_cmd->parsed();
      const std::string& ckpt = is_eval ? ev_ckpt : pr_ckpt;
      const DataFlags& data = is_eval ? ev_data : pr_data;
      std::vector<std::string> ckpt_labels;
      auto model = load_classifier(ckpt, &ckpt_labels);
      LoadedData d = load_data(data, model->kind() == "fusion", err);
      if (is_eval) {
        out << ojson{{"accuracy", evaluate(*model, d.samples)}, {"n", d.samples.size()}}.dump() << '\n';
        return 0;
      }
      std::ostringstream lines;
      for (std::size_t i = 0; i < d.samples.size(); ++i) {
        const Prediction p = predict(*model, d.samples[i]);
        lines << ojson{{"image_id", d.dataset.records[i].image_id},
                       {"label", d.dataset.vocabulary.label(p.label)},
                       {"probabilities", p.probabilities}}
                     .dump()
              << '\n';
      }
      if (pr_out.empty()) {
        out << lines.str();
      } else {
        write_file(pr_out, lines.str());
      }
      return 0;
    }

    if (cv_cmd->parsed()) {
      LoadedData d = load_data(cv_data, cv_model == "fusion", err);
      const CvReport report =
          kfold_cv(builder_for(cv_model, cv_data.dim), d.samples, cv_folds, train_config(cv_flags, cv_seed));
      const std::string text = report.to_json().dump(1) + "\n";
      if (cv_out.empty()) {
        out << text;
      } else {
        write_file(cv_out, text);
        out << ojson{{"mean", report.mean}, {"stddev", report.stddev}}.dump() << '\n';
      }
      return 0;
    }

    if (nms_cmd->parsed()) {
      auto images = read_detections(nms_in);
      std::ostringstream entity_lines;
      for (auto& img : images) {
        img.boxes = nms(img.boxes, nms_iou, nms_keep);
        entity_lines << ojson{{"image_id", img.image_id}, {"entities", entities_from_boxes(img.boxes)}}.dump()
                     << '\n';
      }
      std::ostringstream kept;
      write_detections(kept, images);
      write_file(nms_out, kept.str());
      if (!nms_entities.empty()) write_file(nms_entities, entity_lines.str());
      return 0;
    }

    if (score_cmd->parsed()) {
      const NtlModel model = NtlModel::load(st_model);
      const double raw = model.raw_score(st_head, st_rel, st_tail);
      ojson result{{"head", st_head}, {"relation", st_rel}, {"tail", st_tail}, {"raw_score", raw},
                   {"plausibility", -raw}};
      if (!st_kb.empty()) {
        result["in_kb"] = KnowledgeBase::load(st_kb).contains({st_head, st_rel, st_tail});
      }
      out << result.dump() << '\n';
      return 0;
    }

    if (rank_cmd->parsed()) {
      const NtlModel model = NtlModel::load(rt_model);
      const auto ranked = model.rank_tails(rt_head, rt_rel);
      const std::size_t n = rt_top == 0 ? ranked.size() : std::min(rt_top, ranked.size());
      for (std::size_t i = 0; i < n; ++i) {
        out << ojson{{"rank", i + 1}, {"entity", ranked[i].entity}, {"plausibility", ranked[i].plausibility}}.dump()
            << '\n';
      }
      return 0;
    }

    if (tn_cmd->parsed()) {
      const KnowledgeBase kb = KnowledgeBase::load(tn_kb);
      const WordVectorTable table = WordVectorTable::load(tn_glove, tn_dim);
      const NtlTrainResult result = train_ntl(kb, entity_vectors_for(kb, table), tn_cfg);
      result.model.save(tn_out);
      const double hits1 = hits_at_n(result.model, kb.triples(), 1);
      ojson report{{"k", tn_cfg.k},
                   {"margin", tn_cfg.margin},
                   {"lr", tn_cfg.lr},
                   {"epochs", tn_cfg.epochs},
                   {"negatives_per_positive", tn_cfg.negatives_per_positive},
                   {"seed", tn_cfg.seed},
                   {"train_hits_at_1", hits1},
                   {"epoch_loss", result.epoch_loss}};
      write_file(tn_report.empty() ? sibling(tn_out, ".report.json") : tn_report, report.dump(1) + "\n");
      out << ojson{{"train_hits_at_1", hits1},
                   {"final_loss", result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()}}
                 .dump()
          << '\n';
      return 0;
    }

    if (gc_cmd->parsed()) {
      const GradCheckSweep sweep = grad_check_sweep(parse_grad_check_target(gc_model), gc_draws, gc_seed, gc_coords);
      const bool ok = sweep.max_rel_error <= gc_tol;
      out << ojson{{"model", gc_model},
                   {"draws", sweep.draws},
                   {"coords_checked", sweep.coords_checked},
                   {"kinks_skipped", sweep.kinks_skipped},
                   {"max_rel_error", sweep.max_rel_error},
                   {"worst", sweep.worst},
                   {"tolerance", gc_tol},
                   {"pass", ok}}
                 .dump()
          << '\n';
      return ok ? 0 : 1;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace semlink
