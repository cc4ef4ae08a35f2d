use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::client::{BackendError, ClientConfig, CompletionBackend, HttpBackend, RetryPolicy, TokenBucket};
use super::{
    parse_response, AnnotationCache, AnnotationRecord, CacheKey, PromptTemplate, RelevanceError, Result, Source,
};
use crate::corpus::Publication;

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub retry: RetryPolicy,
    pub concurrency: usize,
    pub requests_per_second: Option<f64>,
    pub burst: u32,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions::from(&ClientConfig::default())
    }
}

impl From<&ClientConfig> for BatchOptions {
    fn from(c: &ClientConfig) -> Self {
        BatchOptions {
            retry: c.retry_policy(),
            concurrency: c.concurrency.max(1),
            requests_per_second: c.requests_per_second,
            burst: c.burst,
        }
    }
}

#[derive(Debug)]
pub struct ItemOutcome {
    pub post_id: String,
    /// Endpoint calls made for this item; zero on a cache hit.
    pub attempts: u32,
    pub from_cache: bool,
    pub result: Result<AnnotationRecord>,
}

#[derive(Debug, Default)]
pub struct BatchReport {
    /// One outcome per input publication, in input order.
    pub items: Vec<ItemOutcome>,
    pub network_calls: usize,
}

impl BatchReport {
    pub fn records(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.items.iter().filter_map(|i| i.result.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &ItemOutcome> {
        self.items.iter().filter(|i| i.result.is_err())
    }

    pub fn cache_hits(&self) -> usize {
        self.items.iter().filter(|i| i.from_cache).count()
    }
}

fn key_for(p: &Publication, template_hash: &str, model_id: &str) -> CacheKey {
    CacheKey { post_id: p.post_id.clone(), template_hash: template_hash.to_string(), model_id: model_id.to_string() }
}

/// Grades each publication, consulting the cache first.
///
/// Uncached items are spread over `concurrency` workers sharing one token
/// bucket. Transient endpoint failures are retried with exponential backoff;
/// any per-item failure is reported in its outcome without stopping the batch.
/// Successful records are appended to the cache as soon as they parse.
pub fn annotate_batch(
    publications: &[Publication],
    template: &PromptTemplate,
    backend: &dyn CompletionBackend,
    cache: &mut AnnotationCache,
    options: &BatchOptions,
) -> BatchReport {
    let template_hash = template.hash();
    let model_id = backend.model_id().to_string();

    let mut slots: Vec<Option<ItemOutcome>> = Vec::with_capacity(publications.len());
    let mut pending = Vec::new();
    for (i, p) in publications.iter().enumerate() {
        match cache.get(&key_for(p, &template_hash, &model_id)) {
            Some(r) => slots.push(Some(ItemOutcome {
                post_id: p.post_id.clone(),
                attempts: 0,
                from_cache: true,
                result: Ok(r.clone()),
            })),
            None => {
                slots.push(None);
                pending.push(i);
            }
        }
    }

    let calls = AtomicUsize::new(0);
    if !pending.is_empty() {
        let bucket = options.requests_per_second.map(|r| TokenBucket::new(options.burst, r));
        let next = AtomicUsize::new(0);
        let cache = Mutex::new(&mut *cache);
        let done = Mutex::new(Vec::with_capacity(pending.len()));
        let workers = options.concurrency.clamp(1, pending.len());

        let work = |p: &Publication| -> (u32, Result<AnnotationRecord>) {
            let prompt = match template.render(&p.text) {
                Ok(s) => s,
                Err(e) => return (0, Err(e)),
            };
            let (raw, attempts) = options.retry.run(|| {
                if let Some(b) = &bucket {
                    b.acquire();
                }
                calls.fetch_add(1, Ordering::Relaxed);
                backend.complete(&prompt)
            });
            let raw = match raw {
                Ok(raw) => raw,
                Err(BackendError::Transient(m) | BackendError::Permanent(m)) => {
                    return (attempts, Err(RelevanceError::Endpoint { attempts, message: m }))
                }
            };
            let label = match parse_response(&raw) {
                Ok(l) => l,
                Err(e) => return (attempts, Err(e)),
            };
            let record = AnnotationRecord {
                post_id: p.post_id.clone(),
                label,
                raw_response: raw,
                source: Source::Llm,
                model_id: model_id.clone(),
                template_hash: template_hash.clone(),
                probabilities: None,
            };
            match cache.lock().unwrap().insert(record.clone()) {
                Ok(_) => (attempts, Ok(record)),
                Err(e) => (attempts, Err(e)),
            }
        };

        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&i) = pending.get(k) else { break };
                    let (attempts, result) = work(&publications[i]);
                    done.lock().unwrap().push((i, attempts, result));
                });
            }
        });

        for (i, attempts, result) in done.into_inner().unwrap() {
            slots[i] =
                Some(ItemOutcome { post_id: publications[i].post_id.clone(), attempts, from_cache: false, result });
        }
    }

    BatchReport {
        items: slots.into_iter().map(|s| s.expect("every item resolved")).collect(),
        network_calls: calls.into_inner(),
    }
}

struct CacheOnly(String);

impl CompletionBackend for CacheOnly {
    fn model_id(&self) -> &str {
        &self.0
    }

    fn complete(&self, _: &str) -> std::result::Result<String, BackendError> {
        Err(BackendError::Permanent("no endpoint configured".into()))
    }
}

/// Annotates against the configured HTTP endpoint. The credential is only
/// required when at least one item is missing from the cache.
pub fn annotate_with_config(
    publications: &[Publication],
    template: &PromptTemplate,
    config: &ClientConfig,
    cache: &mut AnnotationCache,
) -> Result<BatchReport> {
    let template_hash = template.hash();
    let all_cached = publications.iter().all(|p| cache.contains(&key_for(p, &template_hash, &config.model)));
    let options = BatchOptions::from(config);
    if all_cached {
        return Ok(annotate_batch(publications, template, &CacheOnly(config.model.clone()), cache, &options));
    }
    let backend = HttpBackend::from_config(config)?;
    Ok(annotate_batch(publications, template, &backend, cache, &options))
}
