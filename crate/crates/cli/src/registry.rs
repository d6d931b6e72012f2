//! Built-in scenarios, embedded at compile time.

macro_rules! registry {
    ($($id:literal),* $(,)?) => {
        const ENTRIES: &[(&str, &str)] = &[
            $(($id, include_str!(concat!("../scenarios/", $id, ".toml")))),*
        ];
    };
}

registry!(
    "fig1-left",
    "fig1-right",
    "fig2-left-text",
    "fig2-left-caption",
    "fig2-right-text",
    "fig2-right-caption",
    "fig3-solid",
    "fig3-dotted",
    "fig3-text",
    "fig4",
    "fig5-h1",
    "fig5-h2",
    "fig5-h5",
);

pub fn ids() -> impl Iterator<Item = &'static str> {
    ENTRIES.iter().map(|(id, _)| *id)
}

pub fn source(id: &str) -> Option<&'static str> {
    ENTRIES.iter().find(|(k, _)| *k == id).map(|(_, v)| *v)
}
