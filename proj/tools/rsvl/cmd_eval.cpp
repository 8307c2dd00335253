#include <fstream>
#include <iostream>
#include <optional>

#include "commands.hpp"
#include "rsvl/error.hpp"
#include "rsvl/probe.hpp"
#include "rsvl/semloc.hpp"
#include "rsvl/zeroshot.hpp"

namespace cli {

namespace {

void require_same_dim(const rsvl::EmbeddingMatrix& a, const std::string& an,
                      const rsvl::EmbeddingMatrix& b, const std::string& bn) {
  if (a.dim() != b.dim()) {
    throw UsageError(an + " dim " + std::to_string(a.dim()) + " does not match " + bn + " dim " +
                     std::to_string(b.dim()));
  }
}

// ---- eval-retrieval ----

struct RetrievalOptions {
  std::filesystem::path images, texts, pairs;
};

Outcome run_retrieval(const RetrievalOptions& o) {
  Report rep("eval-retrieval");
  struct Loaded {
    rsvl::EmbeddingMatrix images, texts;
    rsvl::PairedSet pairs;
  };
  auto in = validated([&] {
    auto img = rsvl::read_embeddings(o.images);
    auto txt = rsvl::read_embeddings(o.texts);
    require_same_dim(img, "images", txt, "texts");
    auto pairs = o.pairs.empty() ? rsvl::PairedSet::one_to_one(img.rows())
                                 : read_pairs(o.pairs, img.rows());
    if (pairs.n_captions() != txt.rows()) {
      throw UsageError("pairing covers " + std::to_string(pairs.n_captions()) + " captions, texts have " +
                       std::to_string(txt.rows()) + " rows");
    }
    return Loaded{std::move(img), std::move(txt), std::move(pairs)};
  });
  rep.config() = {{"images", o.images.string()},
                  {"texts", o.texts.string()},
                  {"pairs", o.pairs.empty() ? ordered_json(nullptr) : ordered_json(o.pairs.string())}};
  rep.input("images", o.images);
  rep.input("texts", o.texts);
  if (!o.pairs.empty()) rep.input("pairs", o.pairs);

  auto r = rsvl::retrieval_report(in.images, in.texts, in.pairs);
  auto& j = rep.result();
  j["n_images"] = in.images.rows();
  j["n_captions"] = in.texts.rows();
  j["r1_i2t"] = r.r1_i2t;
  j["r5_i2t"] = r.r5_i2t;
  j["r10_i2t"] = r.r10_i2t;
  j["r1_t2i"] = r.r1_t2i;
  j["r5_t2i"] = r.r5_t2i;
  j["r10_t2i"] = r.r10_t2i;
  j["mean_recall"] = r.mean_recall;

  Table t({"direction", "R@1", "R@5", "R@10"});
  t.row({"image->text", fixed(r.r1_i2t), fixed(r.r5_i2t), fixed(r.r10_i2t)});
  t.row({"text->image", fixed(r.r1_t2i), fixed(r.r5_t2i), fixed(r.r10_t2i)});
  return {std::move(rep), t.str() + "mR " + fixed(r.mean_recall) + "\n", t.csv()};
}

// ---- eval-zeroshot ----

struct ZeroShotOptions {
  std::filesystem::path images, labels, classes, class_embeddings, emit_prompts;
  std::string template_text;
  std::string preset = "a-satellite";
  std::string dataset;
};

Outcome run_zeroshot(const ZeroShotOptions& o) {
  Report rep("eval-zeroshot");
  struct Loaded {
    rsvl::PromptTemplate tmpl;
    std::vector<std::string> prompts;
    std::optional<rsvl::EmbeddingMatrix> images, classes;
    std::vector<std::size_t> labels;
  };
  auto in = validated([&] {
    auto tmpl = o.template_text.empty() ? rsvl::PromptTemplate::preset(o.preset)
                                        : rsvl::PromptTemplate(o.template_text);
    auto names = read_string_array(o.classes);
    Loaded l{tmpl, rsvl::build_prompts(names, tmpl), std::nullopt, std::nullopt, {}};
    if (!o.class_embeddings.empty()) {
      if (o.images.empty() || o.labels.empty()) {
        throw UsageError("--class-embeddings needs --images and --labels");
      }
      l.classes = rsvl::read_embeddings(o.class_embeddings);
      l.images = rsvl::read_embeddings(o.images);
      if (l.classes->rows() != names.size()) {
        throw UsageError(std::to_string(names.size()) + " class names but " +
                         std::to_string(l.classes->rows()) + " class embeddings");
      }
      require_same_dim(*l.images, "images", *l.classes, "class embeddings");
      l.labels = read_labels(o.labels, l.images->rows());
      for (auto lab : l.labels) {
        if (lab >= names.size()) {
          throw UsageError("label " + std::to_string(lab) + " outside " + std::to_string(names.size()) +
                           " classes");
        }
      }
    } else if (o.emit_prompts.empty()) {
      throw UsageError("nothing to do: pass --class-embeddings or --emit-prompts");
    }
    return l;
  });
  std::string dataset = !o.dataset.empty()      ? o.dataset
                        : !o.images.empty()     ? o.images.stem().string()
                                                : o.classes.stem().string();
  auto path_or_null = [](const std::filesystem::path& p) {
    return p.empty() ? ordered_json(nullptr) : ordered_json(p.string());
  };
  rep.config() = {{"dataset", dataset},
                  {"classes", o.classes.string()},
                  {"template", in.tmpl.pattern()},
                  {"images", path_or_null(o.images)},
                  {"labels", path_or_null(o.labels)},
                  {"class_embeddings", path_or_null(o.class_embeddings)}};
  rep.input("classes", o.classes);

  auto& j = rep.result();
  j["template"] = in.tmpl.pattern();
  j["n_classes"] = in.prompts.size();
  j["prompts"] = in.prompts;
  if (!o.emit_prompts.empty()) {
    std::ofstream f(o.emit_prompts, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + o.emit_prompts.string());
    f << ordered_json(in.prompts).dump(2) << '\n';
    f.close();
    rep.output("prompts", o.emit_prompts);
  }

  Table t({"dataset", "classes", "images", "top-1"});
  if (in.classes) {
    rep.input("images", o.images);
    rep.input("labels", o.labels);
    rep.input("class_embeddings", o.class_embeddings);
    auto pred = rsvl::zeroshot_classify(rsvl::l2_normalize(*in.images), rsvl::l2_normalize(*in.classes));
    auto zr = rsvl::make_zeroshot_report(
        {{dataset, rsvl::top1_accuracy(pred, in.labels), in.images->rows()}});
    j["datasets"] = ordered_json::array();
    for (const auto& e : zr.datasets) {
      j["datasets"].push_back({{"dataset", e.dataset}, {"accuracy", e.accuracy}, {"n_images", e.n_images}});
      t.row({e.dataset, std::to_string(in.prompts.size()), std::to_string(e.n_images), fixed(e.accuracy)});
    }
    j["average"] = zr.average;
  } else {
    j["datasets"] = ordered_json::array();
    j["average"] = nullptr;
    t.row({dataset, std::to_string(in.prompts.size()), "-", "-"});
  }
  return {std::move(rep), t.str(), t.csv()};
}

// ---- eval-semloc ----

struct SemLocOptions {
  std::filesystem::path windows, query, gt, pgm;
  std::int64_t scene_w = 0, scene_h = 0;
  std::int64_t window = 256, stride = 128, cell = 32;
  rsvl::SemLocWeights weights;
};

Outcome run_semloc(const SemLocOptions& o) {
  Report rep("eval-semloc");
  struct Loaded {
    rsvl::SemLocScene scene;
    rsvl::EmbeddingMatrix query;
    rsvl::GroundTruthFile gt_file;
    std::optional<rsvl::GroundTruthRegion> gt;
  };
  auto in = validated([&] {
    rsvl::validate(o.weights);
    Loaded l;
    l.scene.scene_w = o.scene_w;
    l.scene.scene_h = o.scene_h;
    l.scene.cell = o.cell;
    l.scene.windows = rsvl::window_grid(o.scene_w, o.scene_h, o.window, o.stride);
    auto win = rsvl::read_embeddings(o.windows);
    if (win.rows() != l.scene.windows.size()) {
      throw UsageError(o.windows.string() + " has " + std::to_string(win.rows()) + " rows, the grid has " +
                       std::to_string(l.scene.windows.size()) + " windows");
    }
    l.query = rsvl::read_embeddings(o.query);
    if (l.query.rows() != 1) throw UsageError(o.query.string() + ": expected exactly one query row");
    require_same_dim(win, "windows", l.query, "query");
    l.scene.window_embeddings = rsvl::l2_normalize(win);
    l.query = rsvl::l2_normalize(l.query);
    l.gt_file = rsvl::read_ground_truth(o.gt);
    if (l.gt_file.in_cells) {
      auto [mw, mh] = rsvl::map_dims(o.scene_w, o.scene_h, o.cell);
      l.gt.emplace(mw, mh, l.gt_file.rects);
    } else {
      l.gt.emplace(rsvl::gt_from_pixel_rects(l.gt_file.rects, o.scene_w, o.scene_h, o.cell));
    }
    return l;
  });
  rep.config() = {{"windows", o.windows.string()},
                  {"query", o.query.string()},
                  {"gt", o.gt.string()},
                  {"scene_w", o.scene_w},
                  {"scene_h", o.scene_h},
                  {"window", o.window},
                  {"stride", o.stride},
                  {"cell", o.cell},
                  {"w_su", o.weights.w_su},
                  {"w_as", o.weights.w_as},
                  {"w_da", o.weights.w_da}};
  rep.input("windows", o.windows);
  rep.input("query", o.query);
  rep.input("gt", o.gt);

  auto r = rsvl::semloc_report(in.scene, in.query.row(0), *in.gt, o.weights);
  if (!o.pgm.empty()) {
    rsvl::write_pgm(r.map, o.pgm);
    rep.output("map", o.pgm);
  }
  auto& j = rep.result();
  j["scene"] = in.gt_file.scene;
  j["n_windows"] = in.scene.windows.size();
  j["map_width"] = r.map.width;
  j["map_height"] = r.map.height;
  j["r_su"] = r.r_su;
  j["r_as"] = r.r_as;
  j["r_da"] = r.r_da;
  j["r_mi"] = r.r_mi;

  Table t({"scene", "Rsu", "Ras", "Rda", "Rmi"});
  t.row({in.gt_file.scene.empty() ? "-" : in.gt_file.scene, fixed(r.r_su, 4), fixed(r.r_as, 4),
         fixed(r.r_da, 4), fixed(r.r_mi, 4)});
  return {std::move(rep), t.str(), t.csv()};
}

// ---- eval-probe ----

struct ProbeCliOptions {
  std::filesystem::path features, labels;
  std::string dataset;
  std::string shots = "full";
  std::string method = "linear";
  std::string metric = "euclidean";
  std::size_t k = 20;
  rsvl::ProbeConfig cfg;
};

Outcome run_probe(const ProbeCliOptions& o) {
  Report rep("eval-probe");
  rsvl::ProbeOptions opts;
  opts.config = o.cfg;
  opts.method = o.method == "knn" ? rsvl::ProbeMethod::Knn : rsvl::ProbeMethod::Linear;
  opts.metric = o.metric == "cosine" ? rsvl::KnnMetric::Cosine : rsvl::KnnMetric::Euclidean;
  opts.k = o.k;
  if (o.shots != "full") opts.config.shots = std::stoul(o.shots);

  auto data = validated([&] {
    rsvl::validate(opts.config);
    if (opts.k < 1) throw UsageError("--k must be >= 1");
    auto x = rsvl::read_embeddings(o.features);
    auto y = read_labels(o.labels, x.rows());
    return rsvl::LabeledFeatures::make(std::move(x), std::move(y));
  });
  std::string dataset = o.dataset.empty() ? o.features.stem().string() : o.dataset;
  auto shots_json = opts.config.shots ? ordered_json(*opts.config.shots) : ordered_json("full");
  rep.config() = {{"features", o.features.string()},
                  {"labels", o.labels.string()},
                  {"dataset", dataset},
                  {"shots", shots_json},
                  {"method", o.method},
                  {"k", o.k},
                  {"metric", o.metric},
                  {"split", o.cfg.split_ratio},
                  {"l2", o.cfg.l2_strength},
                  {"max_iter", o.cfg.max_iter},
                  {"grad_tol", o.cfg.grad_tol},
                  {"seed", o.cfg.seed}};
  rep.seed(o.cfg.seed);
  rep.input("features", o.features);
  rep.input("labels", o.labels);

  auto r = rsvl::run_probe(dataset, data, opts);
  auto& j = rep.result();
  j["dataset"] = r.dataset;
  j["shots"] = shots_json;
  j["accuracy"] = r.accuracy;
  j["method"] = o.method;
  j["n_classes"] = data.n_classes;
  j["n_train"] = r.n_train;
  j["n_test"] = r.n_test;
  j["converged"] = r.converged;
  if (!r.converged) std::cerr << "warning: logistic regression stopped at --max-iter before --grad-tol\n";

  Table t({"dataset", "method", "shots", "train", "test", "top-1"});
  t.row({r.dataset, o.method, o.shots, std::to_string(r.n_train), std::to_string(r.n_test),
         fixed(r.accuracy)});
  return {std::move(rep), t.str(), t.csv()};
}

}  // namespace

Subcommand add_eval_retrieval(CLI::App& root) {
  auto o = std::make_shared<RetrievalOptions>();
  auto* app = root.add_subcommand("eval-retrieval", "Image-text retrieval R@1/5/10 in both directions");
  app->add_option("--images", o->images, "RSEB image embeddings")->required()->check(CLI::ExistingFile);
  app->add_option("--texts", o->texts, "RSEB caption embeddings")->required()->check(CLI::ExistingFile);
  app->add_option("--pairs", o->pairs,
                  "JSON {\"image_of\": [...]} mapping each caption row to its image; "
                  "default pairs row i with row i")
      ->check(CLI::ExistingFile);
  auto common = add_common(app);
  return {app, common, [o] { return run_retrieval(*o); }};
}

Subcommand add_eval_zeroshot(CLI::App& root) {
  auto o = std::make_shared<ZeroShotOptions>();
  auto* app = root.add_subcommand("eval-zeroshot", "Zero-shot classification against prompt-filled class names");
  app->add_option("--classes", o->classes, "JSON array of class names")->required()->check(CLI::ExistingFile);
  app->add_option("--class-embeddings", o->class_embeddings,
                  "RSEB text embeddings of the prompts, one row per class")
      ->check(CLI::ExistingFile);
  app->add_option("--images", o->images, "RSEB image embeddings")->check(CLI::ExistingFile);
  app->add_option("--labels", o->labels, "Row-id JSONL sidecar with a class label per image row")
      ->check(CLI::ExistingFile);
  auto* tmpl = app->add_option("--template", o->template_text,
                               "Prompt template containing {class name} exactly once");
  app->add_option("--preset", o->preset,
                  "Template preset: a-satellite = \"a satellite image of {class name}\", "
                  "the-satellite = \"the satellite image of {class name}\"")
      ->check(CLI::IsMember({"a-satellite", "the-satellite"}))
      ->excludes(tmpl);
  app->add_option("--dataset", o->dataset, "Dataset name for the report (default: images file stem)");
  app->add_option("--emit-prompts", o->emit_prompts, "Also write the filled prompts as a JSON array");
  auto common = add_common(app);
  return {app, common, [o] { return run_zeroshot(*o); }};
}

Subcommand add_eval_semloc(CLI::App& root) {
  auto o = std::make_shared<SemLocOptions>();
  auto* app = root.add_subcommand("eval-semloc",
                                  "Semantic localization of a text query over a large scene");
  app->add_option("--windows", o->windows, "RSEB embeddings of the sliding windows, grid row-major order")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--query", o->query, "RSEB file with one query text embedding")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--gt", o->gt, "Ground truth JSON {\"scene\", \"rects\": [[x,y,w,h], ...]}")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--scene-w", o->scene_w, "Scene width in pixels")->required()->check(CLI::PositiveNumber);
  app->add_option("--scene-h", o->scene_h, "Scene height in pixels")->required()->check(CLI::PositiveNumber);
  app->add_option("--window", o->window, "Window side in pixels")->check(CLI::PositiveNumber);
  app->add_option("--stride", o->stride, "Window stride in pixels")->check(CLI::PositiveNumber);
  app->add_option("--cell", o->cell, "Map cell side in pixels")->check(CLI::PositiveNumber);
  app->add_option("--w-su", o->weights.w_su, "Rmi weight of Rsu");
  app->add_option("--w-as", o->weights.w_as, "Rmi weight of (1 - Ras)");
  app->add_option("--w-da", o->weights.w_da, "Rmi weight of Rda");
  app->add_option("--pgm", o->pgm, "Write the attention map as an 8-bit PGM");
  auto common = add_common(app);
  return {app, common, [o] { return run_semloc(*o); }};
}

Subcommand add_eval_probe(CLI::App& root) {
  auto o = std::make_shared<ProbeCliOptions>();
  auto* app = root.add_subcommand("eval-probe", "Few-shot / full linear probe or k-NN on frozen image features");
  app->add_option("--features", o->features, "RSEB image features")->required()->check(CLI::ExistingFile);
  app->add_option("--labels", o->labels, "Row-id JSONL sidecar with a class label per row")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--dataset", o->dataset, "Dataset name for the report (default: features file stem)");
  app->add_option("--shots", o->shots, "Training examples per class")
      ->check(CLI::IsMember({"1", "4", "8", "16", "32", "full"}));
  app->add_option("--method", o->method, "Classifier")->check(CLI::IsMember({"linear", "knn"}));
  app->add_option("--k", o->k, "Neighbours for --method knn");
  app->add_option("--metric", o->metric, "k-NN distance")->check(CLI::IsMember({"euclidean", "cosine"}));
  app->add_option("--split", o->cfg.split_ratio, "Train fraction of the stratified train/test split");
  app->add_option("--l2", o->cfg.l2_strength, "Inverse L2 strength C of the logistic regression");
  app->add_option("--max-iter", o->cfg.max_iter, "Gradient descent iteration cap");
  app->add_option("--grad-tol", o->cfg.grad_tol, "Stop when the gradient infinity norm falls below this");
  app->add_option("--seed", o->cfg.seed, "Seed for the split and shot sampling");
  auto common = add_common(app);
  return {app, common, [o] { return run_probe(*o); }};
}

}  // namespace cli
