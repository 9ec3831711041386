async def fetch(session, url):
    async with session.get(url) as resp:
        async for chunk in resp.content:
            yield chunk
