use std::collections::HashSet;

use discovery::catalog::{write_catalog, CategoryScheme};
use discovery::engine::{Engine, StreamRequest, EVENTS_FILE};
use discovery::events::{read_event_log, EventEnvelope, InteractionType};
use discovery::pipeline::RankingConfig;
use discovery::simulator::{gen_catalog, CatalogSpec};

fn request(user: Option<&str>, session: &str, page: usize) -> StreamRequest {
    StreamRequest {
        user_id: user.map(str::to_string),
        session: Some(session.to_string()),
        page,
        size: 30,
    }
}

fn envelope(id: usize, user: &str, item: &str, kind: InteractionType) -> EventEnvelope {
    EventEnvelope {
        event_id: Some(format!("e{id}")),
        user_id: user.to_string(),
        item_id: item.to_string(),
        kind,
        ts: id as i64,
    }
}

fn install(dir: &std::path::Path) -> Vec<String> {
    let spec = CatalogSpec {
        n_items: 600,
        d: 12,
        ..Default::default()
    };
    let (raws, _) = gen_catalog(&spec, 3).unwrap();
    let src = dir.join("src.jsonl");
    write_catalog(std::fs::File::create(&src).unwrap(), &raws).unwrap();
    Engine::install_catalog(&dir.join("data"), &src, &CategoryScheme::synthetic(12)).unwrap();
    raws.into_iter().map(|r| r.item_id).collect()
}

#[test]
fn file_catalog_to_pages_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let ids = install(dir.path());
    let data = dir.path().join("data");
    let mut engine = Engine::open(&data, RankingConfig::default()).unwrap();

    let pages: Vec<_> = (0..3).map(|p| engine.page(&request(Some("ann"), "s1", p)).unwrap()).collect();
    let mut seen = HashSet::new();
    for page in &pages {
        assert_eq!(page.items.len(), 30);
        assert!(!page.personalized);
        for card in &page.items {
            assert!(seen.insert(card.item_id.clone()), "duplicate {}", card.item_id);
        }
    }
    assert_eq!(engine.page(&request(Some("ann"), "s1", 1)).unwrap(), pages[1]);
    assert_ne!(engine.page(&request(Some("ann"), "s2", 0)).unwrap().items, pages[0].items);

    let shown: Vec<&str> = pages[0].items.iter().map(|c| c.item_id.as_str()).collect();
    let mut batch = Vec::new();
    for (i, item) in shown.iter().enumerate() {
        batch.push(envelope(2 * i, "ann", item, InteractionType::View));
        if i % 3 == 0 {
            batch.push(envelope(2 * i + 1, "ann", item, InteractionType::DetailPage));
        }
    }
    let ack = engine.ingest(batch.clone()).unwrap();
    assert_eq!(ack.accepted, batch.len());
    assert_eq!(engine.ingest(batch).unwrap().duplicates, ack.accepted);
    let logged = read_event_log(data.join(EVENTS_FILE)).unwrap();
    assert_eq!(logged.len(), ack.accepted);
    assert!(logged.iter().all(|e| ids.contains(&e.item_id) && e.category.is_some()));

    let report = engine.refresh().unwrap();
    assert_eq!(report.generation, 1);
    assert_eq!(report.applied_events, ack.accepted);
    let after = engine.page(&request(Some("ann"), "s1", 0)).unwrap();
    assert_eq!(after.model_generation, 1);
    let weights = engine.published().weights_snapshot();
    assert_eq!(weights.generation, 1);
    assert!(weights.weights.iter().all(|w| *w > 0.0 && *w < 1.0));
    drop(engine);

    let reopened = Engine::open(&data, RankingConfig::default()).unwrap();
    assert_eq!(reopened.published().weights_snapshot(), weights);
    assert_eq!(reopened.page(&request(Some("ann"), "s1", 0)).unwrap(), after);
    let replayed = Engine::replay(&data, RankingConfig::default()).unwrap();
    assert_eq!(replayed.published().weights_snapshot(), weights);
    assert_eq!(replayed.page(&request(Some("ann"), "s1", 0)).unwrap(), after);
}

#[test]
fn anonymous_pages_cover_categories() {
    let dir = tempfile::tempdir().unwrap();
    install(dir.path());
    let engine = Engine::open(dir.path().join("data"), RankingConfig::default()).unwrap();
    let page = engine.page(&request(None, "anon", 0)).unwrap();
    let categories: HashSet<_> = page.items.iter().map(|c| c.category).collect();
    assert_eq!(categories.len(), 12);
    let mut bad = request(None, "anon", 0);
    bad.size = 0;
    assert!(engine.page(&bad).is_err());
}
