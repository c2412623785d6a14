use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::Runtime;
use crate::builtin::types as dt;
use crate::ids::{ComponentId, EntryId, InstanceId};
use crate::model::{Catena, DataTypeDescriptor, FieldKind, RenderKind, ViewInstance, ViewSpec};
use crate::store::{Payload, PayloadStore};
use crate::techniques::types::{ActivityHierarchy, IndicatorTable, MilestoneTrend, Status, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewStatus {
    Ok,
    NoData,
    StaleRefreshing,
}

/// Render-ready output of one view instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewModel {
    pub view: InstanceId,
    pub spec: ComponentId,
    pub render: RenderKind,
    pub title: String,
    pub status: ViewStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Render-kind specific document; `null` unless status is ok.
    pub content: Value,
    /// Latest payload version of every bound entry at render time.
    pub source_versions: BTreeMap<EntryId, u64>,
    #[serde(default)]
    pub children: Vec<SlotModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotModel {
    pub slot: String,
    pub model: ViewModel,
}

impl ViewModel {
    /// This model followed by all embedded models, depth first.
    pub fn flatten(&self) -> Vec<&ViewModel> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.model.flatten());
        }
        out
    }
}

/// Latest payload version per bound entry of a view.
pub fn input_versions<S: PayloadStore + ?Sized>(view: &ViewInstance, store: &S) -> BTreeMap<EntryId, u64> {
    view.bindings
        .values()
        .flat_map(|b| b.entries())
        .map(|e| (e.clone(), store.latest_version(e)))
        .collect()
}

struct Ctx<'a, S: ?Sized> {
    rt: &'a Runtime,
    catena: &'a Catena,
    store: &'a S,
    roles: &'a BTreeSet<&'a str>,
    built: BTreeMap<InstanceId, ViewModel>,
    visiting: BTreeSet<InstanceId>,
}

impl Runtime {
    /// View models for every view visible to any of `roles`. Children are
    /// built first and embedded in slot order when visible; a view embedded
    /// in a visible parent is not repeated at top level.
    pub fn refresh_views<'r, S: PayloadStore + ?Sized>(
        &self,
        catena: &Catena,
        store: &S,
        roles: impl IntoIterator<Item = &'r str>,
    ) -> Vec<ViewModel> {
        let roles: BTreeSet<&str> = roles.into_iter().collect();
        let visible: BTreeSet<&InstanceId> = catena
            .views
            .iter()
            .filter(|v| v.is_visible_to(roles.iter().copied()))
            .map(|v| &v.id)
            .collect();
        let embedded: BTreeSet<&InstanceId> = catena
            .views
            .iter()
            .filter(|v| visible.contains(&v.id))
            .flat_map(|v| v.children.values())
            .filter(|c| visible.contains(c))
            .collect();
        let mut ctx = Ctx {
            rt: self,
            catena,
            store,
            roles: &roles,
            built: BTreeMap::new(),
            visiting: BTreeSet::new(),
        };
        let mut out = Vec::new();
        for id in visible {
            if embedded.contains(id) {
                continue;
            }
            if let Some(m) = ctx.build(id) {
                out.push(m);
            }
        }
        out
    }

    /// Renders a single view instance with its visible children.
    pub fn render_view<'r, S: PayloadStore + ?Sized>(
        &self,
        catena: &Catena,
        store: &S,
        view: &str,
        roles: impl IntoIterator<Item = &'r str>,
    ) -> Option<ViewModel> {
        let roles: BTreeSet<&str> = roles.into_iter().collect();
        let mut ctx = Ctx {
            rt: self,
            catena,
            store,
            roles: &roles,
            built: BTreeMap::new(),
            visiting: BTreeSet::new(),
        };
        ctx.build(&InstanceId::new(view))
    }
}

impl<S: PayloadStore + ?Sized> Ctx<'_, S> {
    fn build(&mut self, id: &InstanceId) -> Option<ViewModel> {
        if let Some(m) = self.built.get(id) {
            return Some(m.clone());
        }
        let view = self.catena.view(id.as_str())?;
        if !view.is_visible_to(self.roles.iter().copied()) || !self.visiting.insert(id.clone()) {
            return None;
        }
        let spec = self.rt.registry.views.get(&view.spec);
        let slot_order: Vec<String> = match spec {
            Some(s) => s.slots.iter().map(|s| s.name.clone()).collect(),
            None => view.children.keys().cloned().collect(),
        };
        let mut children = Vec::new();
        for slot in slot_order {
            if let Some(child) = view.children.get(&slot) {
                if let Some(model) = self.build(child) {
                    children.push(SlotModel { slot, model });
                }
            }
        }
        self.visiting.remove(id);
        let model = self.render(view, spec, children);
        self.built.insert(id.clone(), model.clone());
        Some(model)
    }

    fn render(&self, view: &ViewInstance, spec: Option<&ViewSpec>, children: Vec<SlotModel>) -> ViewModel {
        let source_versions = input_versions(view, self.store);
        let title = view
            .params
            .get("title")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .or_else(|| spec.map(|s| s.name.clone()))
            .unwrap_or_else(|| view.id.to_string());
        let mut model = ViewModel {
            view: view.id.clone(),
            spec: view.spec.clone(),
            render: spec.map_or(RenderKind::Table, |s| s.render),
            title,
            status: ViewStatus::NoData,
            message: None,
            content: Value::Null,
            source_versions,
            children,
        };
        let Some(spec) = spec else {
            model.message = Some(format!("unknown view spec `{}`", view.spec));
            return model;
        };
        let mut inputs = Vec::new();
        for port in &spec.inputs {
            let Some(binding) = view.bindings.get(&port.name) else {
                model.message = Some(format!("unbound port `{}`", port.name));
                return model;
            };
            for entry in binding.sorted_entries() {
                match self.store.latest(entry) {
                    Some(p) => inputs.push(Input {
                        entry: entry.clone(),
                        data_type: port.data_type.clone(),
                        payload: p,
                    }),
                    None => {
                        model.message = Some(format!("no data for entry `{entry}`"));
                        return model;
                    }
                }
            }
        }
        match render_content(spec.render, &inputs, &self.rt.registry.data_types) {
            Ok(content) => {
                model.status = ViewStatus::Ok;
                model.content = content;
            }
            Err(msg) => model.message = Some(msg),
        }
        model
    }
}

struct Input {
    entry: EntryId,
    data_type: ComponentId,
    payload: Payload,
}

fn typed<T: serde::de::DeserializeOwned>(input: &Input) -> Result<T, String> {
    serde_json::from_value(input.payload.body.clone())
        .map_err(|e| format!("entry `{}` is not a valid `{}`: {e}", input.entry, input.data_type))
}

fn of_type<'a>(inputs: &'a [Input], data_type: &'a str) -> impl Iterator<Item = &'a Input> {
    inputs.iter().filter(move |i| i.data_type == data_type)
}

fn render_content(
    kind: RenderKind,
    inputs: &[Input],
    types: &BTreeMap<ComponentId, DataTypeDescriptor>,
) -> Result<Value, String> {
    match kind {
        RenderKind::BarChartDrilldown => bar_chart(inputs),
        RenderKind::LineChart => line_chart(inputs),
        RenderKind::MilestoneTrendChart => milestone_chart(inputs),
        RenderKind::Table => Ok(tables(inputs, types)),
        RenderKind::TrafficLight => traffic_light(inputs),
    }
}

fn indicator_node(
    activity: &str,
    name: &str,
    table: &BTreeMap<&str, &crate::techniques::types::IndicatorRow>,
) -> Map<String, Value> {
    let row = table.get(activity);
    let mut node = Map::new();
    node.insert("activity".into(), json!(activity));
    node.insert("name".into(), json!(name));
    node.insert("planned".into(), json!(row.and_then(|r| r.planned)));
    node.insert("actual".into(), json!(row.and_then(|r| r.actual)));
    node.insert("deviation".into(), json!(row.and_then(|r| r.deviation)));
    node.insert("status".into(), json!(row.map_or(Status::NoBaseline, |r| r.status)));
    node
}

fn bar_chart(inputs: &[Input]) -> Result<Value, String> {
    let indicators: IndicatorTable = match of_type(inputs, dt::INDICATOR_TABLE).next() {
        Some(i) => typed(i)?,
        None => return Err("bar chart requires an indicator table input".into()),
    };
    let rows: BTreeMap<&str, _> = indicators.rows.iter().map(|r| (r.activity.as_str(), r)).collect();
    let hierarchy: Option<ActivityHierarchy> = match of_type(inputs, dt::ACTIVITY_HIERARCHY).next() {
        Some(i) => Some(typed(i)?),
        None => None,
    };
    let roots: Vec<Value> = match &hierarchy {
        Some(h) => {
            let children = h.children();
            fn node(
                h: &ActivityHierarchy,
                children: &BTreeMap<&str, Vec<&str>>,
                rows: &BTreeMap<&str, &crate::techniques::types::IndicatorRow>,
                id: &str,
            ) -> Value {
                let name = h.get(id).map_or(id, |a| a.name.as_str());
                let mut n = indicator_node(id, name, rows);
                let kids: Vec<Value> = children
                    .get(id)
                    .into_iter()
                    .flatten()
                    .map(|c| node(h, children, rows, c))
                    .collect();
                n.insert("children".into(), Value::Array(kids));
                Value::Object(n)
            }
            h.roots().into_iter().map(|r| node(h, &children, &rows, r)).collect()
        }
        None => indicators
            .rows
            .iter()
            .map(|r| {
                let mut n = indicator_node(&r.activity, &r.activity, &rows);
                n.insert("children".into(), json!([]));
                Value::Object(n)
            })
            .collect(),
    };
    Ok(json!({
        "series": ["planned", "actual", "deviation"],
        "roots": roots,
    }))
}

fn line_chart(inputs: &[Input]) -> Result<Value, String> {
    let mut series = Vec::new();
    for i in of_type(inputs, dt::TIME_SERIES) {
        let ts: TimeSeries = typed(i)?;
        series.push(json!({ "name": i.entry, "points": ts.points }));
    }
    Ok(json!({ "series": series }))
}

fn milestone_chart(inputs: &[Input]) -> Result<Value, String> {
    let mut milestones = Vec::new();
    for i in of_type(inputs, dt::MILESTONE_TREND) {
        let t: MilestoneTrend = typed(i)?;
        milestones.extend(t.milestones);
    }
    Ok(json!({ "milestones": milestones }))
}

fn traffic_light(inputs: &[Input]) -> Result<Value, String> {
    let mut counts: BTreeMap<&str, usize> = [Status::Green, Status::Yellow, Status::Red, Status::NoBaseline]
        .into_iter()
        .map(|s| (s.as_str(), 0))
        .collect();
    let mut lights = Vec::new();
    let mut worst: Option<Status> = None;
    for i in of_type(inputs, dt::INDICATOR_TABLE) {
        let t: IndicatorTable = typed(i)?;
        for r in t.rows {
            *counts.entry(r.status.as_str()).or_default() += 1;
            if r.status.severity() > worst.and_then(Status::severity) {
                worst = Some(r.status);
            }
            lights.push(json!({ "activity": r.activity, "status": r.status }));
        }
    }
    Ok(json!({ "counts": counts, "worst": worst, "lights": lights }))
}

fn cell(v: Option<&Value>) -> Value {
    v.cloned().unwrap_or(Value::Null)
}

/// One table per bound entry. A schema with a record list is tabulated by
/// its records; otherwise the top-level fields form a single row.
fn tables(inputs: &[Input], types: &BTreeMap<ComponentId, DataTypeDescriptor>) -> Value {
    let mut out = Vec::new();
    for i in inputs {
        let body = i.payload.body.as_object();
        let fields = types.get(&i.data_type).map(|d| d.fields.as_slice()).unwrap_or_default();
        let list = fields.iter().find_map(|f| match &f.kind {
            FieldKind::RecordList(inner) => Some((f.name.as_str(), inner)),
            _ => None,
        });
        let (columns, rows): (Vec<String>, Vec<Vec<Value>>) = match list {
            Some((name, inner)) => {
                let cols: Vec<String> = inner
                    .iter()
                    .filter(|f| f.kind.is_primitive())
                    .map(|f| f.name.clone())
                    .collect();
                let records = body
                    .and_then(|b| b.get(name))
                    .and_then(Value::as_array)
                    .map(Vec::as_slice)
                    .unwrap_or_default();
                let rows = records
                    .iter()
                    .map(|r| cols.iter().map(|c| cell(r.get(c))).collect())
                    .collect();
                (cols, rows)
            }
            None => {
                let cols: Vec<String> = fields.iter().map(|f| f.name.clone()).collect();
                let row = cols.iter().map(|c| cell(body.and_then(|b| b.get(c)))).collect();
                (cols, vec![row])
            }
        };
        out.push(json!({ "entry": i.entry, "columns": columns, "rows": rows }));
    }
    json!({ "tables": out })
}
