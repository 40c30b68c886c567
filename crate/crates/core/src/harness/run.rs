use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{EpisodeRow, RunReport};
use super::{episode_seed, io_err, EmbedderSource, HarnessError, PlannerSource, RunConfig};
use crate::agent::{oracle_planner, random_choice_planner, to_transcript};
use crate::agent::{run_episode, EpisodeInput, EpisodeRun, PromptContext, Turn};
use crate::dataset::{Corpus, Episode, Stage};
use crate::episodic::{
    corrupt_memory, ensure_gold, recall_at_k, render_memory, retrieve_topk, CachedEmbedder, EpisodicStore,
    MemoryQuery, OutcomeSummary, Summarizer,
};
use crate::evaluator::{delta_metrics, evaluate_trace, Outcome, UtilOutcome};
use crate::profile::{retrieve_profile, update_profile, ProfileConfig, ProfileGraph};
use crate::providers::{
    ChatProvider, Embedder, EndpointConfig, HashEmbedder, HttpChat, HttpEmbedder, ScriptedChat, Transcript,
};
use crate::world::Scene;

/// One line of `trajectories.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLine {
    pub episode_id: String,
    pub stage: Stage,
    pub memory_condition: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub report: RunReport,
    pub store: EpisodicStore,
    pub profile: ProfileGraph,
    pub trajectories: Vec<TrajectoryLine>,
}

impl RunOutput {
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut traj = String::new();
        for t in &self.trajectories {
            traj.push_str(&serde_json::to_string(t).expect("trajectory serializes"));
            traj.push('\n');
        }
        let files = [
            ("config.json", serde_json::to_string_pretty(&self.config).expect("config serializes") + "\n"),
            ("trajectories.jsonl", traj),
            ("memory_store.jsonl", self.store.to_jsonl()),
            ("profile_graph.json", self.profile.to_json()),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(io_err(&p))?;
        }
        self.report.write(dir)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    /// Gold recall of plain top-k retrieval over all utilization queries.
    pub recall: f64,
    pub report: RunReport,
}

/// Providers shared by every episode of a run.
struct Env {
    chat: Option<Arc<dyn ChatProvider>>,
    profile_chat: Option<Arc<dyn ChatProvider>>,
    embedder: Arc<dyn Embedder>,
    summarizer: Option<Summarizer>,
}

impl Env {
    fn build(cfg: &RunConfig) -> Result<Self, HarnessError> {
        let chat: Option<Arc<dyn ChatProvider>> = match &cfg.planner {
            PlannerSource::Endpoint { config } => Some(Arc::new(HttpChat::new(EndpointConfig::load(config)?)?)),
            _ => None,
        };
        let profile_chat = match &cfg.planner {
            PlannerSource::Scripted { dir } if cfg.agent.use_profile_memory => {
                let p = dir.join("profile.json");
                if !p.exists() {
                    return Err(HarnessError::Config(format!(
                        "profile memory with scripted replies needs {}",
                        p.display()
                    )));
                }
                Some(Arc::new(ScriptedChat::new("profile", Transcript::load(&p)?)) as Arc<dyn ChatProvider>)
            }
            _ => chat.clone(),
        };
        let embedder: Arc<dyn Embedder> = match &cfg.embedder {
            EmbedderSource::Hash { seed } => Arc::new(HashEmbedder::with_seed(*seed)),
            EmbedderSource::Endpoint { config, dimension } => Arc::new(CachedEmbedder::new(HttpEmbedder::new(
                EndpointConfig::load(config)?,
                *dimension,
            )?)),
        };
        let summarizer = chat.clone().map(Summarizer::new);
        Ok(Self {
            chat,
            profile_chat,
            embedder,
            summarizer,
        })
    }
}

/// Reply source for one episode.
fn episode_chat(
    cfg: &RunConfig,
    env: &Env,
    ep: &Episode,
    scene: &Scene,
) -> Result<Arc<dyn ChatProvider>, String> {
    let scripted = |lines: Vec<String>| Arc::new(ScriptedChat::cursor(ep.episode_id.clone(), lines)) as Arc<dyn ChatProvider>;
    match &cfg.planner {
        PlannerSource::Oracle => Ok(scripted(oracle_planner(&ep.goal, scene).map_err(|e| e.to_string())?)),
        PlannerSource::RandomChoice if ep.stage == Stage::Acquisition => {
            Ok(scripted(oracle_planner(&ep.goal, scene).map_err(|e| e.to_string())?))
        }
        PlannerSource::RandomChoice => {
            let steps = random_choice_planner(&ep.goal, scene, episode_seed(cfg.seed, &ep.episode_id))
                .map_err(|e| e.to_string())?;
            Ok(scripted(to_transcript(&steps)))
        }
        PlannerSource::Scripted { dir } => {
            let t = Transcript::load(&dir.join(format!("{}.json", ep.episode_id))).map_err(|e| e.to_string())?;
            Ok(Arc::new(ScriptedChat::new(ep.episode_id.clone(), t)))
        }
        PlannerSource::Endpoint { .. } => Ok(env.chat.clone().expect("endpoint chat is built with the env")),
    }
}

struct Played {
    run: EpisodeRun,
    outcome: OutcomeSummary,
}

fn play(cfg: &RunConfig, env: &Env, ep: &Episode, scene: &Scene, context: PromptContext) -> Result<Played, String> {
    let chat = episode_chat(cfg, env, ep, scene)?;
    let input = EpisodeInput {
        episode_id: &ep.episode_id,
        scene,
        context,
    };
    let run = run_episode(input, &cfg.agent, chat.as_ref()).map_err(|e| e.to_string())?;
    let result = evaluate_trace(&ep.goal, &run.trace, scene).map_err(|e| e.to_string())?;
    Ok(Played {
        run,
        outcome: OutcomeSummary {
            percent_complete: result.percent_complete,
            success: result.success,
        },
    })
}

fn row(ep: &Episode, condition: &str, played: &Result<Played, String>) -> EpisodeRow {
    let (pc, success, cycles, steps, limit, error) = match played {
        Ok(p) => (
            p.outcome.percent_complete,
            p.outcome.success,
            p.run.planning_cycles,
            p.run.sim_steps,
            p.run.cycle_limit_hit,
            None,
        ),
        Err(e) => (0.0, false, 0, 0, false, Some(e.clone())),
    };
    EpisodeRow {
        episode_id: ep.episode_id.clone(),
        stage: ep.stage,
        task: ep.task_kind(),
        knowledge_type: ep.knowledge_type,
        subtype: ep.subtype,
        pc,
        success,
        planning_cycles: cycles,
        sim_steps: steps,
        cycle_limit_hit: limit,
        delta_pc: None,
        delta_sr: None,
        memory_condition: condition.to_string(),
        gold_recall: None,
        gold_present: None,
        error,
    }
}

fn trajectory(ep: &Episode, condition: &str, played: &Result<Played, String>) -> Option<TrajectoryLine> {
    played.as_ref().ok().map(|p| TrajectoryLine {
        episode_id: ep.episode_id.clone(),
        stage: ep.stage,
        memory_condition: condition.to_string(),
        turns: p.run.turns.clone(),
    })
}

fn scene_of<'a>(corpus: &'a Corpus, ep: &Episode) -> &'a Scene {
    corpus.scene(&ep.scene_id).expect("corpus validates scene references")
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

struct StageOne {
    rows: Vec<EpisodeRow>,
    trajectories: Vec<TrajectoryLine>,
    store: EpisodicStore,
    profile: ProfileGraph,
}

fn stage_one(cfg: &RunConfig, corpus: &Corpus, env: &Env, pool: &rayon::ThreadPool) -> Result<StageOne, HarnessError> {
    let condition = cfg.memory_condition();
    let eps: Vec<&Episode> = corpus.by_stage(Stage::Acquisition).collect();
    let played: Vec<Result<Played, String>> = pool.install(|| {
        eps.par_iter()
            .map(|ep| {
                let ctx = PromptContext {
                    instruction: ep.instruction.clone(),
                    ..PromptContext::default()
                };
                play(cfg, env, ep, scene_of(corpus, ep), ctx)
            })
            .collect()
    });

    let mut out = StageOne {
        rows: Vec::new(),
        trajectories: Vec::new(),
        store: EpisodicStore::new(),
        profile: ProfileGraph::with_user("user"),
    };
    for (ep, p) in eps.iter().zip(&played) {
        let mut r = row(ep, &condition, p);
        if let Ok(p) = p {
            out.store
                .store(p.run.to_record(&ep.scene_id, &ep.instruction, p.outcome))?;
            if cfg.agent.use_profile_memory {
                let chat = env.profile_chat.as_ref().expect("validated with the config");
                match update_profile(&out.profile, &ep.instruction, chat.as_ref(), env.embedder.as_ref(), ProfileConfig::default()) {
                    Ok((g, _)) => out.profile = g,
                    Err(e) => r.error = Some(format!("profile update: {e}")),
                }
            }
        }
        out.trajectories.extend(trajectory(ep, &condition, p));
        out.rows.push(r);
    }
    Ok(out)
}

/// Memories and profile descriptions for one utilization episode, plus
/// the gold recall before injection and gold presence after it.
fn utilization_context(
    cfg: &RunConfig,
    env: &Env,
    s1: &StageOne,
    ep: &Episode,
) -> Result<(PromptContext, f64, bool), String> {
    let e = |x: &dyn std::fmt::Display| x.to_string();
    let query = MemoryQuery::new(&ep.instruction, &ep.scene_id, cfg.agent.k).with_gold(ep.references.iter().cloned());
    let ranked = retrieve_topk(&s1.store, &query, env.embedder.as_ref()).map_err(|x| e(&x))?;
    let hit = |list: &[crate::episodic::Ranked], g: &String| list.iter().any(|r| &r.record_id == g);
    let recall = if ep.references.is_empty() {
        1.0
    } else {
        ep.references.iter().filter(|g| hit(&ranked, g)).count() as f64 / ep.references.len() as f64
    };
    let seed = episode_seed(cfg.seed, &ep.episode_id);
    let ranked = if cfg.agent.gold_guarantee {
        ensure_gold(&s1.store, ranked, &query, seed).map_err(|x| e(&x))?
    } else {
        ranked
    };
    let present = ep.references.iter().all(|g| hit(&ranked, g));

    let mut memories = Vec::with_capacity(ranked.len());
    for r in &ranked {
        let rec = s1.store.get(&r.record_id).ok_or_else(|| format!("record {} vanished", r.record_id))?;
        let rec = match &cfg.corrupt {
            Some(c) => corrupt_memory(rec, &c.mode, c.rate, episode_seed(seed, &r.record_id)),
            None => rec.clone(),
        };
        memories.push(render_memory(&rec, cfg.agent.memory_format, env.summarizer.as_ref()).map_err(|x| e(&x))?);
    }
    let profile = if cfg.agent.use_profile_memory {
        let provider = env.profile_chat.as_deref();
        retrieve_profile(&ep.instruction, &s1.profile, provider, env.embedder.as_ref(), cfg.agent.k)
            .map_err(|x| e(&x))?
            .descriptions
    } else {
        Vec::new()
    };
    Ok((
        PromptContext {
            instruction: ep.instruction.clone(),
            memories,
            profile,
        },
        recall,
        present,
    ))
}

fn stage_two(
    cfg: &RunConfig,
    corpus: &Corpus,
    env: &Env,
    pool: &rayon::ThreadPool,
    s1: &StageOne,
) -> Result<(Vec<EpisodeRow>, Vec<TrajectoryLine>), HarnessError> {
    let condition = cfg.memory_condition();
    let eps: Vec<&Episode> = corpus.by_stage(Stage::Utilization).collect();
    let results: Vec<(EpisodeRow, Option<TrajectoryLine>)> = pool.install(|| {
        eps.par_iter()
            .map(|ep| match utilization_context(cfg, env, s1, ep) {
                Ok((ctx, recall, present)) => {
                    let p = play(cfg, env, ep, scene_of(corpus, ep), ctx);
                    let mut r = row(ep, &condition, &p);
                    r.gold_recall = Some(recall);
                    r.gold_present = Some(present);
                    (r, trajectory(ep, &condition, &p))
                }
                Err(e) => (row(ep, &condition, &Err(format!("memory: {e}"))), None),
            })
            .collect()
    });
    let (mut rows, trajs): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let acq: BTreeMap<String, Outcome> = s1
        .rows
        .iter()
        .map(|r| (r.episode_id.clone(), Outcome { pc: r.pc, success: r.success }))
        .collect();
    let util: Vec<UtilOutcome> = rows
        .iter()
        .zip(&eps)
        .map(|(r, ep)| UtilOutcome {
            episode_id: r.episode_id.clone(),
            outcome: Outcome { pc: r.pc, success: r.success },
            references: ep.references.clone(),
        })
        .collect();
    let deltas = delta_metrics(&acq, &util).map_err(|e| HarnessError::InconsistentReport(e.to_string()))?;
    for (r, d) in rows.iter_mut().zip(deltas.rows) {
        r.delta_pc = Some(d.delta_pc);
        r.delta_sr = Some(d.delta_sr);
    }
    Ok((rows, trajs.into_iter().flatten().collect()))
}

fn prepare(cfg: &RunConfig) -> Result<(Corpus, Env, rayon::ThreadPool), HarnessError> {
    cfg.validate()?;
    let corpus = Corpus::load(&cfg.corpus)?;
    Ok((corpus, Env::build(cfg)?, pool(cfg.jobs)?))
}

fn finish(cfg: &RunConfig, s1: StageOne, rows: Vec<EpisodeRow>, trajs: Vec<TrajectoryLine>) -> RunOutput {
    let mut all = s1.rows;
    all.extend(rows);
    let mut trajectories = s1.trajectories;
    trajectories.extend(trajs);
    RunOutput {
        config: cfg.clone(),
        report: RunReport::from_rows(cfg.memory_condition(), all),
        store: s1.store,
        profile: s1.profile,
        trajectories,
    }
}

/// Runs every acquisition episode, then every utilization episode against
/// the resulting stores. Writes artifacts when `output` is set.
pub fn run_two_stage(cfg: &RunConfig) -> Result<RunOutput, HarnessError> {
    let (corpus, env, pool) = prepare(cfg)?;
    let s1 = stage_one(cfg, &corpus, &env, &pool)?;
    let (rows, trajs) = stage_two(cfg, &corpus, &env, &pool, &s1)?;
    let out = finish(cfg, s1, rows, trajs);
    if let Some(dir) = &cfg.output {
        out.write(dir)?;
    }
    Ok(out)
}

/// One acquisition pass, then a utilization pass per k. Each point's
/// artifacts go to `output/k{k}` when `output` is set.
pub fn sweep_topk(cfg: &RunConfig, ks: &[usize]) -> Result<Vec<SweepPoint>, HarnessError> {
    let (corpus, env, pool) = prepare(cfg)?;
    if ks.contains(&0) {
        return Err(HarnessError::Config("k must be at least 1".into()));
    }
    let s1 = stage_one(cfg, &corpus, &env, &pool)?;
    let queries: Vec<MemoryQuery> = corpus
        .by_stage(Stage::Utilization)
        .map(|ep| MemoryQuery::new(&ep.instruction, &ep.scene_id, 1).with_gold(ep.references.iter().cloned()))
        .collect();
    let mut points = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut c = cfg.clone();
        c.agent.k = k;
        let recall = recall_at_k(&s1.store, &queries, env.embedder.as_ref(), k)?;
        let (rows, trajs) = stage_two(&c, &corpus, &env, &pool, &s1)?;
        let mut s1_rows = s1.rows.clone();
        for r in &mut s1_rows {
            r.memory_condition = c.memory_condition();
        }
        let out = finish(
            &c,
            StageOne {
                rows: s1_rows,
                trajectories: s1.trajectories.clone(),
                store: s1.store.clone(),
                profile: s1.profile.clone(),
            },
            rows,
            trajs,
        );
        if let Some(dir) = &cfg.output {
            out.write(&dir.join(format!("k{k}")))?;
        }
        points.push(SweepPoint {
            k,
            recall,
            report: out.report,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::bundled_corpus_dir;

    fn cfg(planner: PlannerSource) -> RunConfig {
        let mut c = RunConfig::new(bundled_corpus_dir(), planner);
        c.jobs = 4;
        c
    }

    #[test]
    fn oracle_run_is_perfect_and_deterministic() {
        let a = run_two_stage(&cfg(PlannerSource::Oracle)).unwrap();
        assert_eq!(a.report.infrastructure_errors, 0);
        for agg in &a.report.by_task {
            assert_eq!(agg.sr, 100.0, "{}", agg.group);
            if agg.group != "acquisition" {
                assert_eq!(agg.delta_sr, Some(0.0));
            }
        }
        assert_eq!(a.report.gold_presence, Some(1.0));
        let mut c = cfg(PlannerSource::Oracle);
        c.jobs = 1;
        let b = run_two_stage(&c).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
    }

    #[test]
    fn random_choice_trails_acquisition() {
        let out = run_two_stage(&cfg(PlannerSource::RandomChoice)).unwrap();
        let acq = out.report.aggregate("acquisition").unwrap().sr;
        let single = out.report.aggregate("single").unwrap();
        assert_eq!(acq, 100.0);
        assert!(single.sr < acq);
        assert!(single.delta_sr.unwrap() < 0.0);
    }

    #[test]
    fn writes_artifacts_and_report_dir_rebuilds() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(PlannerSource::Oracle);
        c.output = Some(dir.path().to_path_buf());
        let out = run_two_stage(&c).unwrap();
        for f in ["config.json", "trajectories.jsonl", "memory_store.jsonl", "profile_graph.json", "report.md"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(super::super::report_dir(dir.path()).unwrap(), out.report);
    }

    #[test]
    fn sweep_recall_is_monotone_in_k() {
        let mut c = cfg(PlannerSource::Oracle);
        c.agent.gold_guarantee = false;
        let pts = sweep_topk(&c, &[1, 3, 5]).unwrap();
        assert!(pts.windows(2).all(|w| w[0].recall <= w[1].recall));
        assert_eq!(pts[0].report.memory_condition, "k=1 format=full gold=off profile=off");
    }
}
