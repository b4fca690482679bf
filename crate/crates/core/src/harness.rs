//! Manual-inspection harness for the three use-case scaffolds.
//!
//! Each scaffold is requested at a fixed cursor position under three settings:
//! plain proactive suggestions, with a task description, and with a custom type
//! set. Relevance is judged by a person reading the dump; nothing here scores it.

use std::fmt::Write as _;

use serde::Serialize;
use tokio_util::sync::CancellationToken;

use crate::config::EngineSettings;
use crate::engine::{Effect, Engine, EngineError, TimelineEvent};
use crate::parser::SuggestionGroup;
use crate::prompt::{EnabledTypes, TaskDescription, TaskSource};
use crate::provider::{Provider, ProviderRequest, RequestPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    Proactive,
    TaskDescription,
    TypeCustomization,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Proactive, Setting::TaskDescription, Setting::TypeCustomization];

    pub fn label(self) -> &'static str {
        match self {
            Setting::Proactive => "proactive suggestions",
            Setting::TaskDescription => "+task description",
            Setting::TypeCustomization => "+type customization",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UseCase {
    pub id: &'static str,
    pub title: &'static str,
    pub uri: &'static str,
    pub code: &'static str,
    /// The cursor sits at the end of the first line containing this text.
    pub cursor_after: &'static str,
    pub task: &'static str,
    pub task_source: TaskSource,
    /// Labels as a user would tick them in settings.
    pub types: &'static [&'static str],
    /// What a reviewer should count as relevant.
    pub relevance: &'static str,
}

impl UseCase {
    pub fn cursor_offset(&self) -> usize {
        let byte = match self.code.find(self.cursor_after) {
            Some(at) => self.code[at..].find('\n').map_or(self.code.len(), |n| at + n),
            None => self.code.len(),
        };
        self.code[..byte].chars().count()
    }
}

pub fn use_cases() -> [UseCase; 3] {
    [
        UseCase {
            id: "personal-project",
            title: "Personal project: Calculator class",
            uri: "file:///projects/calc/calculator.py",
            code: include_str!("../assets/harness/calculator.py"),
            cursor_after: "def divide",
            task: "I'm building a calculator app for fun. Help me decide which features to add next.",
            task_source: TaskSource::User,
            types: &["Improvements", "Brainstorming"],
            relevance: "a valid feature extension of the Calculator class",
        },
        UseCase {
            id: "industry-ticket",
            title: "Industry ticket: slow inference benchmark",
            uri: "file:///work/evals/benchmark.py",
            code: include_str!("../assets/harness/benchmark.py"),
            cursor_after: "prediction = model.generate",
            task: "TICKET EVAL-412: The nightly benchmark takes over six hours because examples are \
                   evaluated one at a time. Parallelize inference (batching or a worker pool) so the \
                   run finishes in under an hour without changing reported accuracy.",
            task_source: TaskSource::ImportedTicket,
            types: &["Improvements"],
            relevance: "parallelizes inference or otherwise makes the benchmark faster",
        },
        UseCase {
            id: "school-assignment",
            title: "School assignment: list utilities",
            uri: "file:///course/hw3/assignment.py",
            code: include_str!("../assets/harness/assignment.py"),
            cursor_after: "return ordered[middle]",
            task: "Homework 3: implement find_duplicates and median. I want to learn, not be given answers.",
            task_source: TaskSource::User,
            types: &["Debugging", "Efficiency", "Improvements"],
            relevance: "teaches or explains the completed code",
        },
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnessRun {
    pub use_case: &'static str,
    pub setting: Setting,
    pub prompt: String,
    pub group: Option<SuggestionGroup>,
    pub failure: Option<String>,
    pub provider_requests: u64,
}

/// Requests one group for `case` under `setting` through the normal engine path.
pub async fn run_case(provider: &dyn Provider, settings: &EngineSettings, case: &UseCase, setting: Setting) -> HarnessRun {
    let mut engine = Engine::new(settings.clone());
    let setup = (|| -> Result<bool, EngineError> {
        engine.open_document(0, case.uri, case.code)?;
        engine.move_cursor(0, case.uri, case.cursor_offset())?;
        match setting {
            Setting::Proactive => {}
            Setting::TaskDescription => {
                let task = TaskDescription::new(case.task, case.task_source)?;
                engine.update_config(0, Some(task), None, None)?;
            }
            Setting::TypeCustomization => {
                let enabled = EnabledTypes::from_labels(&settings.aliases, case.types)?;
                engine.update_config(0, None, Some(enabled), None)?;
            }
        }
        engine.trigger(0)
    })();
    let mut run = HarnessRun {
        use_case: case.id,
        setting,
        prompt: String::new(),
        group: None,
        failure: None,
        provider_requests: 0,
    };
    if let Err(e) = setup {
        run.failure = Some(e.to_string());
        return run;
    }
    loop {
        let dispatch = engine.drain_effects().into_iter().find_map(|e| match e {
            Effect::Dispatch(d) => Some(d),
            _ => None,
        });
        let Some(d) = dispatch else { break };
        if run.prompt.is_empty() {
            if let RequestPayload::Proactive(b) = &d.payload {
                run.prompt = b.render();
            }
        }
        run.provider_requests += 1;
        let req = ProviderRequest {
            id: d.request_id,
            payload: d.payload,
            model: d.model,
            max_output_tokens: d.max_output_tokens,
            cancel: CancellationToken::new(),
        };
        let outcome = provider.complete(&req).await;
        let now = engine.last_time();
        engine.provider_done(now, req.id, outcome).expect("time does not move");
    }
    run.group = engine.session().current_group().map(|g| g.group.clone());
    if run.group.is_none() {
        run.failure = engine.stats().timeline.iter().rev().find_map(|e| match &e.event {
            TimelineEvent::Failed { reason } => Some(reason.clone()),
            _ => None,
        });
    }
    run
}

/// Runs every use case under every setting.
pub async fn run_all(provider: &dyn Provider, settings: &EngineSettings) -> Vec<HarnessRun> {
    let mut out = Vec::new();
    for case in use_cases() {
        for setting in Setting::ALL {
            out.push(run_case(provider, settings, &case, setting).await);
        }
    }
    out
}

/// Markdown dump with a blank relevance mark per suggestion.
pub fn render_markdown(runs: &[HarnessRun], include_prompts: bool) -> String {
    let cases = use_cases();
    let mut s = String::new();
    for case in &cases {
        let _ = writeln!(s, "# {}\n", case.title);
        let _ = writeln!(s, "Relevant if: {}.\n", case.relevance);
        for run in runs.iter().filter(|r| r.use_case == case.id) {
            let _ = writeln!(s, "## {}\n", run.setting.label());
            if include_prompts {
                let _ = writeln!(s, "```text\n{}\n```\n", run.prompt);
            }
            match (&run.group, &run.failure) {
                (Some(g), _) => {
                    for sug in &g.suggestions {
                        let _ = writeln!(s, "- [ ] relevant | `{}` {}", sug.tag, sug.description);
                        if !sug.code.is_empty() {
                            let _ = writeln!(s, "\n  ```\n{}\n  ```", indent(&sug.code));
                        }
                        if !sug.explanation.is_empty() {
                            let _ = writeln!(s, "  {}", sug.explanation);
                        }
                    }
                    let _ = writeln!(s, "\nRelevant: __/{}\n", g.suggestions.len());
                }
                (None, reason) => {
                    let _ = writeln!(s, "No suggestions: {}\n", reason.as_deref().unwrap_or("unknown"));
                }
            }
        }
    }
    s
}

fn indent(code: &str) -> String {
    code.lines().map(|l| format!("  {l}")).collect::<Vec<_>>().join("\n")
}
