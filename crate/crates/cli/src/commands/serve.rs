use std::net::SocketAddr;
use std::sync::Arc;

use anyhow::Context;

use spade_service::CampaignStore;

use crate::args::ServeArgs;
use crate::output::init_logging;

pub fn run(a: &ServeArgs) -> anyhow::Result<()> {
    init_logging(None);
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .with_context(|| format!("bad address {}:{}", a.host, a.port))?;
    let store = CampaignStore::open(&a.data_dir).with_context(|| format!("opening {}", a.data_dir.display()))?;
    tracing::info!(campaigns = store.list().len(), "store ready");
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(spade_service::serve(Arc::new(store), addr))?;
    Ok(())
}
