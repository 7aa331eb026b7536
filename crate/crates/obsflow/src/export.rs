//! Inspection dumps: mined rules, cache contents and group placement.

use std::io::Write;

use obsflow_core::cache::CacheStore;
use obsflow_core::placement::Placement;
use obsflow_core::prediction::RuleSet;
use obsflow_core::trace::Catalog;
use obsflow_core::{DtnId, ObjectId};

use crate::Error;

fn object_name(catalog: &Catalog, id: ObjectId) -> String {
    catalog.get(id).map_or_else(|| id.to_string(), |o| o.name.clone())
}

/// `antecedent|consequent|support|confidence`; antecedent items are
/// separated by spaces. `support` counts transactions holding the whole rule.
pub fn write_rules<W: Write>(w: W, rules: &RuleSet, catalog: &Catalog) -> Result<(), Error> {
    let mut wtr = csv::WriterBuilder::new().delimiter(b'|').from_writer(w);
    wtr.write_record(["antecedent", "consequent", "support", "confidence"])?;
    for r in &rules.rules {
        let antecedent: Vec<String> = r.antecedent.iter().map(|o| object_name(catalog, *o)).collect();
        wtr.write_record([
            antecedent.join(" "),
            object_name(catalog, r.consequent),
            r.support.to_string(),
            r.confidence.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One row per cached segment of every listed DTN.
pub fn write_cache_dump<'a, W, I>(w: W, caches: I, catalog: &Catalog) -> Result<(), Error>
where
    W: Write,
    I: IntoIterator<Item = (DtnId, &'a CacheStore)>,
{
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["dtn", "object_id", "range_start", "range_end", "size", "recency", "frequency"])?;
    for (dtn, store) in caches {
        for s in store.segments() {
            wtr.write_record([
                dtn.to_string(),
                object_name(catalog, s.object),
                s.range.start.to_string(),
                s.range.end.to_string(),
                s.bytes.to_string(),
                s.last_access.to_string(),
                s.count.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// One row per virtual group with its hub's score terms.
pub fn write_groups<W: Write>(w: W, placement: &Placement) -> Result<(), Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["epoch", "group_id", "members", "hub_dtn", "throughput", "availability", "frequency", "score"])?;
    for g in &placement.groups {
        let hub = placement.hub_of(g.id);
        let terms = hub.and_then(|h| placement.scores.get(&g.id)?.iter().find(|s| s.dtn == h));
        let num = |f: fn(&obsflow_core::placement::HubScore) -> f64| terms.map_or(String::new(), |t| f(t).to_string());
        wtr.write_record([
            placement.epoch.to_string(),
            g.id.to_string(),
            g.members.len().to_string(),
            hub.map_or(String::new(), |h| h.to_string()),
            num(|t| t.throughput),
            num(|t| t.availability),
            num(|t| t.frequency),
            num(|t| t.score),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use obsflow_core::cache::EvictionPolicy;
    use obsflow_core::prediction::Rule;
    use obsflow_core::Interval;

    fn catalog() -> Catalog {
        Catalog::from_rows([("a".to_string(), 0, 0, 1.0), ("b".to_string(), 1, 0, 1.0), ("c".to_string(), 2, 0, 1.0)])
            .unwrap()
    }

    #[test]
    fn rules_are_pipe_delimited() {
        let rules = RuleSet::from_rules(vec![Rule {
            antecedent: vec![ObjectId(0), ObjectId(1)],
            consequent: ObjectId(2),
            support: 30,
            confidence: 0.75,
        }]);
        let mut buf = Vec::new();
        write_rules(&mut buf, &rules, &catalog()).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "antecedent|consequent|support|confidence\na b|c|30|0.75\n");
    }

    #[test]
    fn cache_dump_lists_segments() {
        let mut store = CacheStore::new(1_000, EvictionPolicy::Lru);
        store.insert(ObjectId(1), Interval::new(0, 10).unwrap(), 2.0, 5.0).unwrap();
        let mut buf = Vec::new();
        write_cache_dump(&mut buf, [(DtnId(1), &store)], &catalog()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1), Some("dtn1,b,0,10,20,5,1"));
    }
}
