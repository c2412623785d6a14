use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::plan::{GqmPlan, Metric};
use crate::ids::{CatenaId, ComponentId, EntryId, InstanceId, ProjectId};
use crate::model::{
    bind_function_instance, Arity, Binding, Bindings, Catena, ComponentKind, ComponentRegistry, DataEntry, FormMode,
    FunctionSpec, Params, PortSpec, RenderKind, ViewInstance, ViewSpec, WebFormInstance,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectContext {
    pub project: ProjectId,
    pub catena: CatenaId,
    /// Roles used for views whose goal names no viewpoint.
    #[serde(default)]
    pub roles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum MetricCoverage {
    /// Components selected for the metric: data type, functions in chain
    /// order, then the view.
    Matched {
        components: Vec<ComponentId>,
    },
    Unmatched {
        missing: Vec<ComponentKind>,
    },
}

impl MetricCoverage {
    pub fn is_matched(&self) -> bool {
        matches!(self, MetricCoverage::Matched { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionResult {
    pub catena: Catena,
    pub coverage: BTreeMap<String, MetricCoverage>,
    /// Fraction of each goal's metrics that were matched; 0 for a goal
    /// without metrics.
    pub goals: BTreeMap<String, f64>,
}

fn tag_overlap(tags: &[String], wanted: &BTreeSet<&str>) -> usize {
    tags.iter()
        .map(String::as_str)
        .collect::<BTreeSet<_>>()
        .intersection(wanted)
        .count()
}

/// Sorts candidates: more desired tags matched first, then higher reuse
/// count, then smaller id.
fn rank<'a, T>(
    items: impl IntoIterator<Item = &'a T>,
    registry: &ComponentRegistry,
    wanted: &BTreeSet<&str>,
    id: impl Fn(&T) -> &ComponentId,
    tags: impl Fn(&T) -> &[String],
) -> Vec<&'a T>
where
    T: 'a,
{
    let mut v: Vec<&T> = items.into_iter().collect();
    v.sort_by(|a, b| {
        tag_overlap(tags(b), wanted)
            .cmp(&tag_overlap(tags(a), wanted))
            .then(registry.reuse_count(id(b)).cmp(&registry.reuse_count(id(a))))
            .then(id(a).cmp(id(b)))
    });
    v
}

fn accepts<'a>(ports: &'a [PortSpec], data_type: &ComponentId) -> Option<&'a PortSpec> {
    ports.iter().find(|p| &p.data_type == data_type)
}

/// Functions composition may instantiate: every parameter has a default.
fn usable(f: &FunctionSpec) -> bool {
    f.params.iter().all(|p| p.default.is_some()) && !f.outputs.is_empty()
}

struct Builder<'a> {
    registry: &'a ComponentRegistry,
    catena: Catena,
}

impl Builder<'_> {
    fn ensure_form_entry(&mut self, id: &str, data_type: &ComponentId) -> EntryId {
        if self.catena.entry(id).is_none() {
            self.catena.data_entries.push(DataEntry::form(id, data_type.as_str()));
        }
        EntryId::new(id)
    }

    fn shared(&mut self, data_type: &ComponentId) -> EntryId {
        self.ensure_form_entry(&format!("shared.{data_type}"), data_type)
    }

    /// Binds every port: `fixed` supplies some ports, the rest go to shared
    /// entries of their type.
    fn bind_ports(&mut self, ports: &[PortSpec], fixed: &BTreeMap<&str, EntryId>) -> Bindings {
        let mut b = Bindings::new();
        for p in ports {
            let entry = match fixed.get(p.name.as_str()) {
                Some(e) => e.clone(),
                None => self.shared(&p.data_type),
            };
            let binding = match p.arity {
                Arity::One => Binding::One(entry),
                Arity::Many => Binding::Many(vec![entry]),
            };
            b.insert(p.name.clone(), binding);
        }
        b
    }

    fn instantiate(&mut self, id: &str, spec: &FunctionSpec, fixed: BTreeMap<&str, EntryId>) -> EntryId {
        let bindings = self.bind_ports(&spec.inputs, &fixed);
        let bound = bind_function_instance(&self.catena, id, spec, bindings, Params::new())
            .expect("composition binds type-correct entries");
        let out = bound.instance.outputs[&spec.outputs[0].name].clone();
        self.catena.data_entries.extend(bound.outputs);
        self.catena.functions.push(bound.instance);
        out
    }
}

/// Picks the function chain for a metric: the best-ranked target whose tags
/// overlap the desired tags and which accepts the data type directly or
/// through one converter.
fn select_chain<'a>(metric: &Metric, registry: &'a ComponentRegistry) -> Option<Vec<&'a FunctionSpec>> {
    let wanted: BTreeSet<&str> = metric.technique_tags.iter().map(String::as_str).collect();
    let candidates: Vec<&FunctionSpec> = registry.functions.values().filter(|f| usable(f)).collect();
    let targets = rank(
        candidates.iter().copied().filter(|f| tag_overlap(&f.tags, &wanted) > 0),
        registry,
        &wanted,
        |f| &f.id,
        |f| &f.tags,
    );
    for target in targets {
        if accepts(&target.inputs, &metric.data_type).is_some() {
            return Some(vec![target]);
        }
        let converters = rank(
            candidates.iter().copied().filter(|c| {
                c.id != target.id
                    && accepts(&c.inputs, &metric.data_type).is_some()
                    && accepts(&target.inputs, &c.outputs[0].data_type).is_some()
            }),
            registry,
            &wanted,
            |f| &f.id,
            |f| &f.tags,
        );
        if let Some(conv) = converters.first() {
            return Some(vec![*conv, target]);
        }
    }
    None
}

fn select_view<'a>(metric: &Metric, data_type: &ComponentId, registry: &'a ComponentRegistry) -> Option<&'a ViewSpec> {
    let wanted: BTreeSet<&str> = metric.technique_tags.iter().map(String::as_str).collect();
    let of_kind = |kind: RenderKind| {
        rank(
            registry
                .views
                .values()
                .filter(move |v| v.render == kind && accepts(&v.inputs, data_type).is_some()),
            registry,
            &wanted,
            |v| &v.id,
            |v| &v.tags,
        )
        .first()
        .copied()
    };
    metric
        .view_kind
        .and_then(of_kind)
        .or_else(|| of_kind(RenderKind::Table))
}

/// Composes a candidate catena for `plan` from the registry. Unmatched
/// metrics contribute nothing to the catena and are reported in coverage.
pub fn compose_catena(plan: &GqmPlan, registry: &ComponentRegistry, ctx: &ProjectContext) -> CompositionResult {
    let mut b = Builder {
        registry,
        catena: Catena::new(ctx.catena.as_str(), ctx.project.as_str()),
    };
    let mut coverage = BTreeMap::new();
    for metric in &plan.metrics {
        let cov = compose_metric(&mut b, plan, metric, ctx);
        coverage.insert(metric.id.clone(), cov);
    }
    add_forms(&mut b);
    let goals = plan
        .goals
        .iter()
        .map(|g| {
            let ms: Vec<&Metric> = plan.metrics_of_goal(&g.id).collect();
            let matched = ms.iter().filter(|m| coverage[&m.id].is_matched()).count();
            let frac = if ms.is_empty() {
                0.0
            } else {
                matched as f64 / ms.len() as f64
            };
            (g.id.clone(), frac)
        })
        .collect();
    CompositionResult {
        catena: b.catena,
        coverage,
        goals,
    }
}

fn compose_metric(b: &mut Builder<'_>, plan: &GqmPlan, metric: &Metric, ctx: &ProjectContext) -> MetricCoverage {
    let registry = b.registry;
    if !registry.data_types.contains_key(&metric.data_type) {
        return MetricCoverage::Unmatched {
            missing: vec![ComponentKind::DataType],
        };
    }
    let chain = if metric.technique_tags.is_empty() {
        Some(Vec::new())
    } else {
        select_chain(metric, registry)
    };
    let mut missing = Vec::new();
    let output_type = match &chain {
        Some(c) => c.last().map_or(&metric.data_type, |f| &f.outputs[0].data_type),
        None => {
            missing.push(ComponentKind::Function);
            &metric.data_type
        }
    };
    let view = select_view(metric, output_type, registry);
    if view.is_none() {
        missing.push(ComponentKind::View);
    }
    let (Some(chain), Some(view)) = (chain, view) else {
        return MetricCoverage::Unmatched { missing };
    };

    let mut components = vec![metric.data_type.clone()];
    let mut current = b.ensure_form_entry(&format!("{}.{}", metric.id, metric.data_type), &metric.data_type);
    let mut current_type = metric.data_type.clone();
    for (i, f) in chain.iter().enumerate() {
        let port = accepts(&f.inputs, &current_type).expect("chain accepts its input");
        let out = b.instantiate(
            &format!("{}.f{}", metric.id, i + 1),
            f,
            BTreeMap::from([(port.name.as_str(), current.clone())]),
        );
        current = out;
        current_type = f.outputs[0].data_type.clone();
        components.push(f.id.clone());
    }
    let port = accepts(&view.inputs, &current_type).expect("view accepts the chain output");
    let bindings = b.bind_ports(&view.inputs, &BTreeMap::from([(port.name.as_str(), current)]));
    let visible_to: BTreeSet<String> = match plan.goal_of_metric(metric) {
        Some(g) if !g.viewpoint.is_empty() => BTreeSet::from([g.viewpoint.clone()]),
        _ => ctx.roles.iter().cloned().collect(),
    };
    b.catena.views.push(ViewInstance {
        id: InstanceId::new(format!("{}.view", metric.id)),
        spec: view.id.clone(),
        bindings,
        params: Params::new(),
        children: BTreeMap::new(),
        visible_to,
    });
    components.push(view.id.clone());
    MetricCoverage::Matched { components }
}

/// Greedily covers form-managed entries with web form instances: each step
/// picks the form reaching the most uncovered entry types.
fn add_forms(b: &mut Builder<'_>) {
    let registry = b.registry;
    let mut uncovered: Vec<(EntryId, ComponentId)> = b
        .catena
        .data_entries
        .iter()
        .filter(|e| e.is_form_managed())
        .map(|e| (e.id.clone(), e.spec.clone()))
        .collect();
    uncovered.sort();
    let mut used: BTreeMap<ComponentId, usize> = BTreeMap::new();
    while !uncovered.is_empty() {
        let reach = |f: &crate::model::WebFormSpec| {
            if matches!(f.mode, FormMode::ManualEntry { .. }) && f.targets.len() != 1 {
                return 0;
            }
            f.targets
                .iter()
                .filter(|t| uncovered.iter().any(|(_, ty)| ty == *t))
                .count()
        };
        let mut forms: Vec<_> = registry.web_forms.values().filter(|f| reach(f) > 0).collect();
        forms.sort_by(|x, y| {
            reach(y)
                .cmp(&reach(x))
                .then(registry.reuse_count(&y.id).cmp(&registry.reuse_count(&x.id)))
                .then(x.id.cmp(&y.id))
        });
        let Some(form) = forms.first() else {
            break;
        };
        let mut bindings = BTreeMap::new();
        for t in &form.targets {
            if let Some(pos) = uncovered.iter().position(|(_, ty)| ty == t) {
                let (entry, _) = uncovered.remove(pos);
                bindings.insert(t.clone(), entry);
            }
        }
        let n = used.entry(form.id.clone()).or_insert(0);
        *n += 1;
        let id = if *n == 1 {
            form.id.to_string()
        } else {
            format!("{}.{n}", form.id)
        };
        b.catena.web_forms.push(WebFormInstance {
            id: id.into(),
            spec: form.id.clone(),
            bindings,
            fields: BTreeMap::new(),
        });
    }
}
