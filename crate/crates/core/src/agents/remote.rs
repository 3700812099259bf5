//! Chat-completion backend with bounded retries and rule-based fallback.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    AgentBackend, AgentError, Answer, AnswerSource, AreaBrief, PromptInterpretation, RuleBackend, SelectedObject,
    SelectionItem, Theme, PROMPT_CONSTRAINTS, PROMPT_ROAD, PROMPT_SELECTION, PROMPT_TERRAIN,
};
use crate::assets::AssetLibrary;
use crate::constraints::{parse_area_constraints, AreaConstraints};
use crate::geometry::TerrainGrid;
use crate::road::RoadParams;
use crate::terrain::TerrainParams;

pub const DEFAULT_API_KEY_ENV: &str = "GARDEN_API_KEY";
const CANDIDATES_PER_AREA: usize = 16;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteBackendConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub temperature: f64,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    /// Fall back to the rule backend when the remote side keeps failing.
    pub fallback: bool,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for RemoteBackendConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            timeout_secs: 60,
            max_retries: 3,
            temperature: 0.0,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            fallback: true,
            api_key: None,
        }
    }
}

impl fmt::Debug for RemoteBackendConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteBackendConfig")
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .field("timeout_secs", &self.timeout_secs)
            .field("max_retries", &self.max_retries)
            .field("temperature", &self.temperature)
            .field("api_key_env", &self.api_key_env)
            .field("fallback", &self.fallback)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl RemoteBackendConfig {
    /// Reads the API key from the configured environment variable.
    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty());
        self
    }
}

pub struct RemoteBackend {
    cfg: RemoteBackendConfig,
    agent: ureq::Agent,
    rules: RuleBackend,
}

/// Strips a Markdown code fence around a JSON reply, if any.
fn unfence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

impl RemoteBackend {
    pub fn new(cfg: RemoteBackendConfig, rules: RuleBackend) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .build()
            .into();
        Self { cfg, agent, rules }
    }

    pub fn config(&self) -> &RemoteBackendConfig {
        &self.cfg
    }

    /// One chat-completion round trip returning the reply parsed as JSON.
    fn chat(&self, system: &str, user: &str) -> Result<Value, String> {
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.cfg.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let reply: Value = req
            .send_json(&body)
            .map_err(|e| format!("request failed: {e}"))?
            .body_mut()
            .read_json()
            .map_err(|e| format!("unreadable response: {e}"))?;
        let content = reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or("response has no message content")?;
        serde_json::from_str(unfence(content)).map_err(|e| format!("reply is not JSON: {e}"))
    }

    /// Runs `attempt` up to `max_retries` times; on exhaustion uses the
    /// fallback value when allowed.
    fn with_retries<T>(
        &self,
        what: &str,
        system: &str,
        user: &str,
        parse: impl Fn(Value) -> Result<(T, Vec<String>), String>,
        fallback: impl FnOnce() -> Result<T, AgentError>,
    ) -> Result<Answer<T>, AgentError> {
        let mut errors = Vec::new();
        for attempt in 1..=self.cfg.max_retries.max(1) {
            match self.chat(system, user).and_then(&parse) {
                Ok((value, warnings)) => {
                    return Ok(Answer { value, source: AnswerSource::Remote, warnings });
                }
                Err(e) => {
                    log::warn!("{what}: attempt {attempt} failed: {e}");
                    errors.push(e);
                }
            }
        }
        let last = errors.last().cloned().unwrap_or_default();
        if !self.cfg.fallback {
            return Err(AgentError::RemoteUnavailable(format!("{what}: {last}")));
        }
        let value = fallback()?;
        Ok(Answer {
            value,
            source: AnswerSource::Fallback,
            warnings: vec![format!("{what}: remote failed after {} attempts ({last}); used rule backend", errors.len())],
        })
    }
}

fn parse_terrain(v: Value) -> Result<((TerrainParams, Vec<Theme>), Vec<String>), String> {
    let terrain: TerrainParams =
        serde_json::from_value(v.get("terrain").cloned().unwrap_or(Value::Null)).map_err(|e| e.to_string())?;
    terrain.validate().map_err(|e| e.to_string())?;
    let mut warnings = Vec::new();
    let mut themes = Vec::new();
    for t in v.get("themes").and_then(Value::as_array).into_iter().flatten() {
        match t.as_str().and_then(Theme::parse) {
            Some(t) if !themes.contains(&t) => themes.push(t),
            Some(_) => {}
            None => warnings.push(format!("unknown theme {t} dropped")),
        }
    }
    themes.sort();
    if themes.is_empty() {
        themes.push(Theme::Normal);
    }
    Ok(((terrain, themes), warnings))
}

fn parse_roads(v: Value) -> Result<(RoadParams, Vec<String>), String> {
    let roads: RoadParams =
        serde_json::from_value(v.get("roads").cloned().unwrap_or(Value::Null)).map_err(|e| e.to_string())?;
    roads.validate(TerrainGrid::DEFAULT_CELL_SIZE).map_err(|e| e.to_string())?;
    Ok((roads, Vec::new()))
}

impl AgentBackend for RemoteBackend {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn interpret_prompt(&self, text: &str) -> Result<Answer<PromptInterpretation>, AgentError> {
        if text.trim().is_empty() {
            return Err(AgentError::EmptyPrompt);
        }
        let rule = || self.rules.interpret(text);
        let terrain = self.with_retries("terrain agent", PROMPT_TERRAIN, text, parse_terrain, || {
            rule().map(|r| (r.terrain, r.themes))
        })?;
        let roads = self.with_retries("road agent", PROMPT_ROAD, text, parse_roads, || rule().map(|r| r.roads))?;
        let source = if terrain.source == AnswerSource::Remote && roads.source == AnswerSource::Remote {
            AnswerSource::Remote
        } else {
            AnswerSource::Fallback
        };
        let (terrain_params, themes) = terrain.value;
        let mut warnings = terrain.warnings;
        warnings.extend(roads.warnings);
        Ok(Answer {
            value: PromptInterpretation { terrain: terrain_params, roads: roads.value, themes },
            source,
            warnings,
        })
    }

    fn select_assets(
        &self,
        lib: &AssetLibrary,
        area: &AreaBrief,
        themes: &[Theme],
    ) -> Result<Answer<Vec<SelectionItem>>, AgentError> {
        if lib.is_empty() {
            return Err(AgentError::EmptyLibrary);
        }
        let tables = self.rules.tables();
        let budget = tables.budget(area.area_m2);
        let limit = tables.footprint_limit(area.area_m2);
        let candidates: Vec<Value> = self
            .rules
            .candidates(lib, area, themes)
            .into_iter()
            .take(CANDIDATES_PER_AREA)
            .map(|r| {
                json!({
                    "name": r.name, "category": r.category.name(), "pos": r.pos,
                    "season": r.season, "description": r.description, "size": r.size,
                })
            })
            .collect();
        let user = json!({
            "area": area.summary,
            "themes": themes,
            "object_budget": budget,
            "footprint_limit_m2": limit,
            "candidates": candidates,
        })
        .to_string();
        let parse = |v: Value| -> Result<(Vec<SelectionItem>, Vec<String>), String> {
            let list = v.get("objects").and_then(Value::as_array).ok_or("reply has no \"objects\" list")?;
            let mut items: Vec<SelectionItem> = Vec::new();
            let mut warnings = Vec::new();
            let (mut used, mut count) = (0.0, 0usize);
            for entry in list {
                let name = entry.get("name").and_then(Value::as_str).unwrap_or_default();
                let Some(rec) = lib.get(name) else {
                    warnings.push(format!("{}: unknown asset {name:?} dropped", area.id));
                    continue;
                };
                if items.iter().any(|i| i.asset.name == rec.name) {
                    continue;
                }
                let want = entry.get("count").and_then(Value::as_u64).unwrap_or(1).max(1) as usize;
                let room = if rec.footprint() > 0.0 { ((limit - used) / rec.footprint()).floor() as usize } else { want };
                let n = want.min(budget.saturating_sub(count)).min(room);
                if n == 0 {
                    warnings.push(format!("{}: {name} dropped over budget", area.id));
                    continue;
                }
                used += rec.footprint() * n as f64;
                count += n;
                items.push(SelectionItem { asset: rec.clone(), count: n });
            }
            if items.is_empty() {
                return Err("no valid asset in reply".into());
            }
            Ok((items, warnings))
        };
        self.with_retries(&format!("selection agent ({})", area.id), PROMPT_SELECTION, &user, parse, || {
            self.rules.select(lib, area, themes)
        })
    }

    fn generate_constraints(
        &self,
        area: &AreaBrief,
        selected: &[SelectedObject],
        themes: &[Theme],
    ) -> Result<Answer<AreaConstraints>, AgentError> {
        if selected.is_empty() {
            return Err(AgentError::EmptySelection(area.id.clone()));
        }
        let names: Vec<String> = selected.iter().map(|o| o.instance.clone()).collect();
        let objects: Vec<Value> = selected
            .iter()
            .map(|o| json!({"name": o.instance, "category": o.asset.category.name(), "size": o.asset.size, "pos": o.asset.pos}))
            .collect();
        let user = json!({"area name": area.id, "area": area.summary, "themes": themes, "objects": objects}).to_string();
        let parse = |v: Value| -> Result<(AreaConstraints, Vec<String>), String> {
            let body = v.get(&area.id).cloned().unwrap_or(v);
            let (constraints, rejected) = parse_area_constraints(&body, &names);
            if constraints.is_empty() {
                return Err(format!("no valid constraint in reply ({} rejected)", rejected.len()));
            }
            let warnings = rejected.into_iter().map(|r| format!("{}: constraint rejected: {r}", area.id)).collect();
            Ok((constraints, warnings))
        };
        self.with_retries(&format!("layout agent ({})", area.id), PROMPT_CONSTRAINTS, &user, parse, || {
            self.rules.constraints(area, selected)
        })
    }
}
