//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Zero;
use serde_json::{json, Value};

use crate::acbm::{self, AllocatorOptions};
use crate::auction::{price_query, Bidder};
use crate::bestresp::{self, Method, DEFAULT_SCALE_CAP};
use crate::equilibrium::{self, DynamicsConfig, EquilibriumReport, Verdict};
use crate::error::{Error, Result};
use crate::fixtures::{self, TableFixture};
use crate::model::{all_in_schedule, check_extension, load_plan, BudgetSplit, Instance, Schedule};
use crate::partition::{global_partition, tables_for};
use crate::rational::{self, Rational};
use crate::report::{self, Names};
use crate::simulate::{compare_outcomes, simulate_day, simulate_day_par, DayOutcome};

#[derive(Parser, Debug)]
#[command(name = "broadmatch", version, about = "Broad-match keyword auctions with exact arithmetic")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads for per-keyword simulation and candidate scans.
    #[arg(long, global = true, value_name = "INT")]
    jobs: Option<usize>,
    /// Reserve score below the last slot.
    #[arg(long, global = true, value_name = "DECIMAL")]
    reserve: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Greedy,
    Dp,
    Fptas,
    Brute,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Greedy => Method::Greedy,
            MethodArg::Dp => Method::Dp,
            MethodArg::Fptas => Method::Fptas,
            MethodArg::Brute => Method::Brute,
        }
    }
}

#[derive(Args, Debug, Default)]
struct PlanArgs {
    /// Budget split document.
    #[arg(long, value_name = "FILE", conflicts_with = "schedule")]
    split: Option<PathBuf>,
    /// Schedule document (splits with start queries).
    #[arg(long, value_name = "FILE")]
    schedule: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check an instance, table or plan document.
    Validate {
        file: PathBuf,
        /// Extension instance to check against the base.
        #[arg(long, value_name = "FILE")]
        ext: Option<PathBuf>,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Price one query of every keyword with all its advertisers present.
    Price { file: PathBuf },
    /// Query partition of each keyword, or one advertiser's tables.
    Partition {
        file: PathBuf,
        #[arg(long, value_name = "ID")]
        advertiser: Option<String>,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Simulate one day.
    Simulate {
        file: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Best response of one advertiser to the others' plan.
    BestResponse {
        file: PathBuf,
        #[arg(long, value_name = "ID")]
        advertiser: Option<String>,
        #[arg(long, value_enum, default_value_t = MethodArg::Greedy)]
        method: MethodArg,
        #[arg(long, value_name = "DECIMAL", default_value = "0.1")]
        eps: String,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Check a split for the local conditions or for approximate optimality.
    Verify {
        file: PathBuf,
        #[arg(long, value_name = "FILE")]
        split: PathBuf,
        #[arg(long, conflicts_with = "eps_ne", required_unless_present = "eps_ne")]
        bme: bool,
        #[arg(long = "eps-ne", value_name = "DECIMAL")]
        eps_ne: Option<String>,
        #[arg(long, value_enum, default_value_t = MethodArg::Dp)]
        method: MethodArg,
    },
    /// Round-robin best-response dynamics.
    Dynamics {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Greedy)]
        method: MethodArg,
        #[arg(long, value_name = "INT", default_value_t = 100)]
        max_rounds: usize,
        /// Starting split; defaults to everyone all-in on the best edge.
        #[arg(long, value_name = "FILE")]
        init: Option<PathBuf>,
        #[arg(long, value_name = "INT")]
        shuffle_seed: Option<u64>,
        #[arg(long, value_name = "DECIMAL", default_value = "0.1")]
        eps: String,
    },
    /// Revenue of extension profiles against the base equilibrium.
    Dilemma {
        base: PathBuf,
        ext: PathBuf,
        #[arg(long, value_name = "FILE", num_args = 1.., required = true)]
        profiles: Vec<PathBuf>,
        /// Base equilibrium; found by greedy dynamics when absent.
        #[arg(long, value_name = "FILE")]
        split: Option<PathBuf>,
    },
    /// Spend excess budgets along the new edges.
    Acbm {
        base: PathBuf,
        #[arg(long, value_name = "FILE")]
        ext: PathBuf,
        /// Also scan per-query starts inside the best segment.
        #[arg(long)]
        fine: bool,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Check that one instance extends another and compare their days.
    Compare {
        base: PathBuf,
        ext: PathBuf,
        /// Plan on the base instance.
        #[arg(long, value_name = "FILE")]
        split: Option<PathBuf>,
        /// Plan on the extension; defaults to the base plan.
        #[arg(long, value_name = "FILE")]
        schedule: Option<PathBuf>,
    },
    /// List, print or write the bundled fixtures.
    Fixtures {
        name: Option<String>,
        #[arg(long, value_name = "DIR", conflicts_with = "name")]
        write: Option<PathBuf>,
    },
}

/// What a command run produced.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Ctx {
    format: Format,
    reserve: Rational,
    parallel: bool,
}

struct Done {
    digest: Option<String>,
    result: Value,
    text: String,
    code: i32,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<Instance> {
    Instance::from_json(&read(path)?)
}

fn is_table_doc(text: &str) -> bool {
    serde_json::from_str::<Value>(text).ok().and_then(|v| v.get("tables").cloned()).is_some()
}

fn parse_num(text: &str, what: &str) -> Result<Rational> {
    rational::parse(text).map_err(|m| Error::InvalidArgument(format!("{what}: {m}")))
}

fn plan_of(inst: &Instance, plan: &PlanArgs) -> Result<Schedule> {
    match (&plan.split, &plan.schedule) {
        (Some(p), _) => Ok(BudgetSplit::from_json(inst, &read(p)?)?.to_schedule()),
        (None, Some(p)) => Schedule::from_json(inst, &read(p)?),
        (None, None) => Ok(all_in_schedule(inst)),
    }
}

fn adv_of(inst: &Instance, id: &str) -> Result<usize> {
    inst.adv_index(id).ok_or_else(|| Error::InvalidArgument(format!("unknown advertiser {id:?}")))
}

fn simulate(ctx: &Ctx, inst: &Instance, plan: &Schedule) -> Result<DayOutcome> {
    if ctx.parallel {
        simulate_day_par(inst, plan, &ctx.reserve)
    } else {
        simulate_day(inst, plan, &ctx.reserve)
    }
}

fn verdict_code(r: &EquilibriumReport) -> i32 {
    if r.verdict == Verdict::Holds {
        0
    } else {
        3
    }
}

fn done(digest: Option<String>, result: Value, text: String) -> Done {
    Done { digest, result, text, code: 0 }
}

fn execute(ctx: &Ctx, command: Command) -> Result<Done> {
    match command {
        Command::Validate { file, ext, plan } => {
            let text = read(&file)?;
            if is_table_doc(&text) {
                let f = TableFixture::from_json(&text)?;
                if plan.schedule.is_some() {
                    return Err(Error::InvalidArgument("table documents take --split only".into()));
                }
                let mut result = json!({"kind": "tables", "keywords": f.keywords.len(), "warnings": []});
                if let Some(p) = &plan.split {
                    let (queries, _) = f.read_split(&read(p)?)?;
                    result["plan_entries"] = json!(queries.iter().filter(|&&x| x > 0).count());
                }
                return Ok(done(Some(report::digest(&f.to_json())), result, format!("ok: tables for {} keywords\n", f.keywords.len())));
            }
            let inst = Instance::from_json(&text)?;
            let mut result = json!({
                "kind": "instance",
                "advertisers": inst.n(),
                "keywords": inst.m(),
                "edges": inst.edges.len(),
                "extension_edges": inst.edges.iter().filter(|e| e.tag == crate::model::Tag::Extension).count(),
                "warnings": [],
            });
            let target = match &ext {
                Some(p) => {
                    let e = load_instance(p)?;
                    let rep = check_extension(&inst, &e)?;
                    result["new_edges"] = json!(rep
                        .new_edges
                        .iter()
                        .map(|(a, k)| json!({"advertiser": a, "keyword": k}))
                        .collect::<Vec<_>>());
                    e
                }
                None => inst.clone(),
            };
            if plan.split.is_some() || plan.schedule.is_some() {
                let sc = plan_of(&target, &plan)?;
                result["plan_entries"] = json!(sc.entries.len());
            }
            Ok(done(Some(report::digest(&inst.to_json())), result, "ok\n".into()))
        }
        Command::Price { file } => {
            let inst = load_instance(&file)?;
            let names = Names::of(&inst);
            let mut rows = Vec::new();
            let mut text = String::new();
            for kw in 0..inst.m() {
                let bidders: Vec<Bidder> = inst
                    .advertisers_of(kw)
                    .into_iter()
                    .map(|a| Bidder { adv: a, score: inst.score(a, kw).expect("edge").clone() })
                    .collect();
                let s = price_query(&bidders, &inst.slots, &ctx.reserve);
                text.push_str(&format!("keyword {}\n", names.kw(kw)));
                for (r, b) in s.ranking.iter().enumerate() {
                    text.push_str(&format!(
                        "  {:>3}  {:<12} score {:>10}  cost {:>10}  payoff {:>10}\n",
                        r + 1,
                        names.adv(b.adv),
                        rational::fmt(&b.score),
                        rational::fmt(&s.cost[r]),
                        rational::fmt(&s.payoff[r])
                    ));
                }
                let mut v = report::slate(&names, &s);
                v["keyword"] = json!(names.kw(kw));
                rows.push(v);
            }
            Ok(done(Some(report::digest(&inst.to_json())), json!({"keywords": rows}), text))
        }
        Command::Partition { file, advertiser, plan } => {
            let inst = load_instance(&file)?;
            let names = Names::of(&inst);
            let sc = plan_of(&inst, &plan)?;
            let digest = Some(report::digest(&inst.to_json()));
            match advertiser {
                Some(id) => {
                    let adv = adv_of(&inst, &id)?;
                    let tables = tables_for(&inst, &sc, adv, &ctx.reserve)?;
                    let text: String = tables.iter().map(|t| report::partition_text(&names, t)).collect();
                    let result = json!({"tables": tables.iter().map(|t| report::partition_table(&names, t)).collect::<Vec<_>>()});
                    Ok(done(digest, result, text))
                }
                None => {
                    let g = global_partition(&inst, &sc, &ctx.reserve)?;
                    let text = report::outcome_table(&names, &g.outcome);
                    Ok(done(digest, report::global_partition(&names, &g), text))
                }
            }
        }
        Command::Simulate { file, plan } => {
            let inst = load_instance(&file)?;
            let names = Names::of(&inst);
            let sc = plan_of(&inst, &plan)?;
            let o = simulate(ctx, &inst, &sc)?;
            Ok(done(Some(report::digest(&inst.to_json())), report::outcome(&names, &o), report::outcome_table(&names, &o)))
        }
        Command::BestResponse { file, advertiser, method, eps, plan } => {
            let eps = parse_num(&eps, "--eps")?;
            let text = read(&file)?;
            let (names, tables, budget, digest) = if is_table_doc(&text) {
                let f = TableFixture::from_json(&text)?;
                if let Some(id) = &advertiser {
                    if id != &f.advertiser {
                        return Err(Error::InvalidArgument(format!("unknown advertiser {id:?}")));
                    }
                }
                (Names::of_tables(&f), f.tables.clone(), f.budget.clone(), report::digest(&f.to_json()))
            } else {
                let inst = Instance::from_json(&text)?;
                let id = advertiser.ok_or_else(|| Error::InvalidArgument("--advertiser is required for instances".into()))?;
                let adv = adv_of(&inst, &id)?;
                let sc = plan_of(&inst, &plan)?;
                let tables = tables_for(&inst, &sc, adv, &ctx.reserve)?;
                (Names::of(&inst), tables, inst.advertisers[adv].budget.clone(), report::digest(&inst.to_json()))
            };
            let res = bestresp::best_response(&tables, &budget, method.into(), &eps, DEFAULT_SCALE_CAP)?;
            Ok(done(Some(digest), report::response(&names, &res), report::response_text(&names, &res)))
        }
        Command::Verify { file, split, bme, eps_ne, method } => {
            let text = read(&file)?;
            if is_table_doc(&text) {
                if !bme {
                    return Err(Error::InvalidArgument("table documents support --bme only".into()));
                }
                let f = TableFixture::from_json(&text)?;
                let names = Names::of_tables(&f);
                let (queries, budgets) = f.read_split(&read(&split)?)?;
                let violations = equilibrium::table_violations(0, &f.tables, &queries, &budgets, &f.budget);
                let verdict = if violations.is_empty() { Verdict::Holds } else { Verdict::Violated };
                let r = EquilibriumReport { verdict, violations, advertisers: Vec::new() };
                let mut result = report::equilibrium(&names, &r);
                result["marginals"] = json!([report::marginals(&names, 0, &equilibrium::table_pairs(&f.tables, &queries))]);
                let code = verdict_code(&r);
                return Ok(Done { digest: Some(report::digest(&f.to_json())), result, text: report::equilibrium_text(&names, &r), code });
            }
            let inst = Instance::from_json(&text)?;
            let names = Names::of(&inst);
            let sp = BudgetSplit::from_json(&inst, &read(&split)?)?;
            let r = if bme {
                equilibrium::verify_bme(&inst, &sp, &ctx.reserve)?
            } else {
                let eps = parse_num(eps_ne.as_deref().unwrap_or("0"), "--eps-ne")?;
                equilibrium::verify_eps_ne(&inst, &sp, &eps, method.into(), &ctx.reserve, DEFAULT_SCALE_CAP)?
            };
            let mut result = report::equilibrium(&names, &r);
            if bme {
                let mut m = Vec::new();
                for adv in 0..inst.n() {
                    m.push(report::marginals(&names, adv, &equilibrium::marginal_payoffs(&inst, &sp, adv, &ctx.reserve)?));
                }
                result["marginals"] = json!(m);
            }
            let code = verdict_code(&r);
            Ok(Done { digest: Some(report::digest(&inst.to_json())), result, text: report::equilibrium_text(&names, &r), code })
        }
        Command::Dynamics { file, method, max_rounds, init, shuffle_seed, eps } => {
            let inst = load_instance(&file)?;
            let start = match &init {
                Some(p) => BudgetSplit::from_json(&inst, &read(p)?)?,
                None => equilibrium::all_in_split(&inst),
            };
            let cfg = DynamicsConfig {
                method: method.into(),
                max_rounds,
                shuffle_seed,
                eps: parse_num(&eps, "--eps")?,
                reserve: ctx.reserve.clone(),
                scale_cap: DEFAULT_SCALE_CAP,
            };
            let d = equilibrium::best_response_dynamics(&inst, start, &cfg)?;
            let text = format!("{} after {} rounds\n", d.status.name(), d.rounds);
            Ok(done(Some(report::digest(&inst.to_json())), report::dynamics(&inst, &d), text))
        }
        Command::Dilemma { base, ext, profiles, split } => {
            let b = load_instance(&base)?;
            let e = load_instance(&ext)?;
            let base_split = match &split {
                Some(p) => Some(BudgetSplit::from_json(&b, &read(p)?)?),
                None => None,
            };
            let ps = profiles.iter().map(|p| BudgetSplit::from_json(&e, &read(p)?)).collect::<Result<Vec<_>>>()?;
            let d = equilibrium::dilemma_report(&b, &e, base_split, &ps, &ctx.reserve)?;
            Ok(done(Some(report::digest(&b.to_json())), report::dilemma(&e, &b, &d), report::dilemma_text(&d)))
        }
        Command::Acbm { base, ext, fine, plan } => {
            let b = load_instance(&base)?;
            let e = load_instance(&ext)?;
            check_extension(&b, &e)?;
            let sc = plan_of(&b, &plan)?;
            let opts = AllocatorOptions { parallel: ctx.parallel, ..AllocatorOptions::new(fine) };
            let r = acbm::allocate_excess(&b, &e, &sc, &ctx.reserve, &opts)?;
            let names = Names::of(&e);
            let base_names = Names::of(&b);
            let profile = acbm::excess_budgets(&b, &r.base_outcome);
            let ws = acbm::obrev_check(&b, &e, &r.base_outcome, &ctx.reserve)?;
            let mut result = report::allocation(&e, &r);
            result["excess"] = report::excess(&base_names, &profile);
            result["witnesses"] = report::witnesses(&names, &ws);
            let mut text = report::comparison_table(&names, &r.base_outcome, &r.outcome);
            for m in &r.moves {
                text.push_str(&format!(
                    "move: advertiser {} enters {} at query {} with budget {} (dR {})\n",
                    names.adv(m.entry.adv),
                    names.kw(m.entry.kw),
                    m.entry.start,
                    rational::fmt(&m.entry.budget),
                    rational::fmt(&m.delta_revenue)
                ));
            }
            Ok(done(Some(report::digest(&b.to_json())), result, text))
        }
        Command::Compare { base, ext, split, schedule } => {
            let b = load_instance(&base)?;
            let e = load_instance(&ext)?;
            let rep = check_extension(&b, &e)?;
            let base_text = match &split {
                Some(p) => Some(read(p)?),
                None => None,
            };
            let base_plan = match &base_text {
                Some(t) => load_plan(&b, t)?,
                None => all_in_schedule(&b),
            };
            let ext_plan = match (&schedule, &base_text) {
                (Some(p), _) => load_plan(&e, &read(p)?)?,
                (None, Some(t)) => load_plan(&e, t)?,
                (None, None) => all_in_schedule(&b),
            };
            let ob = simulate(ctx, &b, &base_plan)?;
            let oe = simulate(ctx, &e, &ext_plan)?;
            let d = compare_outcomes(&ob, &oe)?;
            let names = Names::of(&e);
            let result = json!({
                "new_edges": rep.new_edges.iter().map(|(a, k)| json!({"advertiser": a, "keyword": k})).collect::<Vec<_>>(),
                "delta": report::delta(&names, &d),
            });
            Ok(done(Some(report::digest(&b.to_json())), result, report::comparison_table(&names, &ob, &oe)))
        }
        Command::Fixtures { .. } => unreachable!("handled before dispatch"),
    }
}

fn fixtures_command(name: Option<String>, write: Option<PathBuf>) -> Outcome {
    let bundle = fixtures::bundle();
    let ok = |stdout: String| Outcome { code: 0, stdout, stderr: String::new() };
    if let Some(dir) = write {
        if let Err(e) = std::fs::create_dir_all(&dir) {
            return Outcome { code: 1, stdout: String::new(), stderr: format!("cannot create {}: {e}\n", dir.display()) };
        }
        for (n, text) in &bundle {
            if let Err(e) = std::fs::write(dir.join(n), text) {
                return Outcome { code: 1, stdout: String::new(), stderr: format!("cannot write {n}: {e}\n") };
            }
        }
        return ok(format!("wrote {} files to {}\n", bundle.len(), dir.display()));
    }
    match name {
        None => ok(bundle.keys().map(|k| format!("{k}\n")).collect()),
        Some(n) => match bundle.get(n.as_str()) {
            Some(text) => ok(text.clone()),
            None => Outcome { code: 2, stdout: String::new(), stderr: format!("unknown fixture {n:?}\n") },
        },
    }
}

fn exit_code_of(e: &Error) -> i32 {
    match e {
        Error::Schema { .. } | Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

/// Runs one command line; `argv` excludes the program name.
pub fn run(argv: &[String]) -> Outcome {
    let cli = match Cli::try_parse_from(std::iter::once("broadmatch".to_string()).chain(argv.iter().cloned())) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    if let Command::Fixtures { name, write } = cli.command {
        return fixtures_command(name, write);
    }
    let reserve = match cli.reserve.as_deref().map(|r| parse_num(r, "--reserve")) {
        None => Ok(Rational::zero()),
        Some(r) => r,
    };
    let result = reserve.and_then(|reserve| {
        let jobs = cli.jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
        }
        if jobs > 1 {
            // A pool already built by an earlier call in this process is kept.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
        }
        let ctx = Ctx { format: cli.format, reserve, parallel: jobs > 1 };
        execute(&ctx, cli.command).map(|d| (d, ctx.format))
    });
    match result {
        Ok((d, format)) => {
            let stdout = match format {
                Format::Json => report::render(&report::envelope(argv, d.digest.as_deref(), d.result, d.code)),
                Format::Table => d.text,
            };
            Outcome { code: d.code, stdout, stderr: String::new() }
        }
        Err(e) => {
            let code = exit_code_of(&e);
            Outcome {
                code,
                stdout: report::render(&report::envelope(argv, None, report::error(&e), code)),
                stderr: format!("error: {e}\n"),
            }
        }
    }
}
