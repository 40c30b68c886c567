use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::{EpisodeRecord, EpisodicError, MemoryFormat};
use crate::providers::{ChatMessage, ChatProvider, ChatRequest};

const SUMMARY_SYSTEM: &str = include_str!("../../prompts/summarize.txt");

/// Produces trajectory summaries with one provider call per record,
/// cached by record id and provider identity.
pub struct Summarizer {
    provider: Arc<dyn ChatProvider>,
    cache: Mutex<BTreeMap<(String, String), String>>,
    calls: AtomicUsize,
}

impl Summarizer {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        Self {
            provider,
            cache: Mutex::new(BTreeMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Provider calls made so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn summarize(&self, record: &EpisodeRecord) -> Result<String, EpisodicError> {
        let key = (record.record_id.clone(), self.provider.identity());
        if let Some(hit) = self.cache.lock().expect("summary cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let request = ChatRequest::new(vec![
            ChatMessage::system(SUMMARY_SYSTEM),
            ChatMessage::user(full(record)),
        ]);
        self.calls.fetch_add(1, Ordering::SeqCst);
        let summary = self.provider.chat(&request)?.content.trim().to_string();
        self.cache
            .lock()
            .expect("summary cache poisoned")
            .insert(key, summary.clone());
        Ok(summary)
    }
}

fn full(record: &EpisodeRecord) -> String {
    let mut out = format!("Instruction: {}\n", record.instruction);
    for s in &record.steps {
        out.push_str(&format!(
            "Thought: {}\nAction: {}\nObservation: {}\n",
            s.thought, s.action, s.observation
        ));
    }
    out
}

pub fn render_memory(
    record: &EpisodeRecord,
    format: MemoryFormat,
    summarizer: Option<&Summarizer>,
) -> Result<String, EpisodicError> {
    match format {
        MemoryFormat::Full => Ok(full(record)),
        MemoryFormat::Summarization => {
            let s = summarizer.ok_or(EpisodicError::ProviderUnavailable)?;
            Ok(format!("Instruction: {}\nSummary: {}\n", record.instruction, s.summarize(record)?))
        }
        MemoryFormat::InstructionOnly => Ok(format!("Instruction: {}\n", record.instruction)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episodic::tests::record;
    use crate::providers::{ScriptedChat, Transcript};

    #[test]
    fn formats() {
        let r = record("a", "s", "tidy the desk", 3);
        let f = render_memory(&r, MemoryFormat::Full, None).unwrap();
        assert_eq!(f.matches("Thought:").count(), 3);
        let i = render_memory(&r, MemoryFormat::InstructionOnly, None).unwrap();
        assert!(!i.contains("Thought") && !i.contains("Action") && !i.contains("obs"));
        assert!(matches!(
            render_memory(&r, MemoryFormat::Summarization, None),
            Err(EpisodicError::ProviderUnavailable)
        ));
    }

    #[test]
    fn summaries_are_cached() {
        let chat = Arc::new(ScriptedChat::new("sum", Transcript::cursor(["moved things"])));
        let s = Summarizer::new(chat.clone());
        let r = record("a", "s", "tidy the desk", 3);
        let one = render_memory(&r, MemoryFormat::Summarization, Some(&s)).unwrap();
        let two = render_memory(&r, MemoryFormat::Summarization, Some(&s)).unwrap();
        assert_eq!(one, two);
        assert_eq!(s.calls(), 1);
        assert_eq!(chat.calls(), 1);
    }
}
