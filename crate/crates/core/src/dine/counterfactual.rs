use super::{DominanceChart, UncertainActionDine};
use crate::{Error, Result};

fn label<'a>(names: &'a [String], index: usize, what: &'static str) -> Result<&'a str> {
    names.get(index).map(String::as_str).ok_or(Error::OutOfRange {
        what,
        index,
        len: names.len(),
    })
}

/// Contrastive explanation text, one paragraph per contrastive entry in
/// channel order, paragraphs separated by a blank line.
pub fn render_counterfactual(
    dine: &UncertainActionDine,
    chart: &DominanceChart,
    channel_names: &[String],
    action_names: &[String],
) -> Result<String> {
    if dine.timestep != chart.timestep {
        return Err(Error::Config(format!(
            "uncertain action at t={} paired with dominance chart at t={}",
            dine.timestep, chart.timestep
        )));
    }
    let chosen = label(action_names, dine.chosen_action, "action label")?;
    let dominant = label(channel_names, chart.dominant_channel, "channel label")?;
    let mut entries: Vec<_> = dine.contrastive.iter().collect();
    entries.sort_by_key(|e| e.channel);
    let paragraphs = entries
        .into_iter()
        .map(|e| {
            let channel = label(channel_names, e.channel, "channel label")?;
            let action = label(action_names, e.preferred_action, "action label")?;
            Ok(format!(
                "To reach the goal {channel}, I should actually choose action {action}. \
                 However, it is currently more important to choose action {chosen} \
                 to achieve the goal {dominant}."
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(paragraphs.join("\n\n"))
}
